//! `amg`: generate test problems, build hierarchies, solve and sweep.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 a solve did not
//! converge (or a verification check failed).

mod config;
mod experiment;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use amg_core::sparse::io::{write_matrix_market, write_vector};
use amg_core::theory::run_lemma_suite;
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{ConfigError, ExperimentConfig, Format};
use experiment::Record;

#[derive(Parser)]
#[command(name = "amg", version, about = "Root-node algebraic multigrid experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the problem matrix and right-hand side in Matrix Market format.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output prefix; writes PREFIX.mtx and PREFIX.rhs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a hierarchy and print its levels.
    Setup(Common),
    /// Build and solve one configuration.
    Solve(Common),
    /// Solve every point of the configured sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Problem sizes (sweep.sizes).
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Angles in radians (sweep.psi).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Vec<f64>,
        /// Angles k*pi/16 for k = 0..=K, overriding --angles.
        #[arg(long, value_name = "K")]
        sixteenths: Option<usize>,
        /// Prefilter thetas, `none` for no filter (sweep.prefilter).
        #[arg(long, value_delimiter = ',')]
        pre: Vec<String>,
        /// Postfilter thetas, `none` for no filter (sweep.postfilter).
        #[arg(long, value_delimiter = ',')]
        post: Vec<String>,
    },
    /// Run the dense lemma checks on random instances.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render saved records (CSV or JSON) as a table.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Table::Filter)]
        table: Table,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    /// Pre/post theta, SC, OC, CC, rho, iterations.
    Filter,
    /// Setup work units per phase.
    Setup,
}

/// Configuration file plus flag overrides; every flag names a config key.
#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// problem.kind
    #[arg(long)]
    kind: Option<String>,
    /// problem.n
    #[arg(long)]
    n: Option<usize>,
    /// problem.ny
    #[arg(long)]
    ny: Option<usize>,
    /// problem.eps
    #[arg(long)]
    eps: Option<f64>,
    /// problem.psi (radians)
    #[arg(long)]
    psi: Option<f64>,
    /// setup.method (rn, sa, cf)
    #[arg(long)]
    method: Option<String>,
    /// setup.interp.degree
    #[arg(long)]
    degree: Option<usize>,
    /// setup.interp.prefilter theta, or `none`
    #[arg(long)]
    prefilter: Option<String>,
    /// setup.interp.postfilter theta, or `none`
    #[arg(long)]
    postfilter: Option<String>,
    /// setup.relax.scheme
    #[arg(long)]
    relax: Option<String>,
    /// solve.accel (none, cg, gmres)
    #[arg(long)]
    accel: Option<String>,
    /// solve.tol
    #[arg(long)]
    tol: Option<f64>,
    /// solve.max_iters
    #[arg(long)]
    max_iters: Option<usize>,
    /// seed
    #[arg(long)]
    seed: Option<u64>,
    /// matrix (Matrix Market file replacing the generated matrix)
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// output.format
    #[arg(long)]
    format: Option<String>,
    /// output.path
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Any other key: `--set setup.interp.energy_iters=6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn filter_value(s: &str) -> String {
    if s.eq_ignore_ascii_case("none") {
        "null".into()
    } else {
        format!(r#"{{"theta": {s}}}"#)
    }
}

fn quoted(s: &str) -> String {
    serde_json::Value::String(s.to_string()).to_string()
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, ConfigError> {
        let mut o: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        put("problem.kind", self.kind.as_deref().map(quoted));
        put("problem.n", self.n.map(|v| v.to_string()));
        put("problem.ny", self.ny.map(|v| v.to_string()));
        put("problem.eps", self.eps.map(|v| v.to_string()));
        put("problem.psi", self.psi.map(|v| v.to_string()));
        put("setup.method", self.method.as_deref().map(quoted));
        put("setup.interp.degree", self.degree.map(|v| v.to_string()));
        put("setup.interp.prefilter", self.prefilter.as_deref().map(filter_value));
        put("setup.interp.postfilter", self.postfilter.as_deref().map(filter_value));
        put("setup.relax.scheme", self.relax.as_deref().map(quoted));
        put("solve.accel", self.accel.as_deref().map(quoted));
        put("solve.tol", self.tol.map(|v| v.to_string()));
        put("solve.max_iters", self.max_iters.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("matrix", self.matrix.as_ref().map(|p| quoted(&p.to_string_lossy())));
        put("output.format", self.format.as_deref().map(quoted));
        put("output.path", self.output.as_ref().map(|p| quoted(&p.to_string_lossy())));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("--set expects KEY=VALUE, got {kv}")))?;
            o.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(o)
    }

    fn load(&self, extra: Vec<(String, String)>) -> Result<ExperimentConfig, ConfigError> {
        let mut o = self.overrides()?;
        o.extend(extra);
        let cfg = ExperimentConfig::load(self.config.as_deref())?.with_overrides(&o)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sink(cfg: &ExperimentConfig) -> Result<Box<dyn Write>, ConfigError> {
    match &cfg.output.path {
        None => Ok(Box::new(std::io::stdout())),
        Some(p) => std::fs::File::create(p)
            .map(|f| Box::new(std::io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| ConfigError(format!("cannot create {}: {e}", p.display()))),
    }
}

fn io_err(e: std::io::Error) -> ConfigError {
    ConfigError(format!("write failed: {e}"))
}

fn emit(cfg: &ExperimentConfig, records: &[Record]) -> Result<ExitCode, ConfigError> {
    let mut out = sink(cfg)?;
    experiment::write_records(records, cfg.output.format, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    Ok(if records.iter().all(|r| r.converged) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn sweep_values(v: &[String]) -> Option<String> {
    (!v.is_empty()).then(|| {
        let items: Vec<String> = v
            .iter()
            .map(|s| if s.eq_ignore_ascii_case("none") { "null".into() } else { s.clone() })
            .collect();
        format!("[{}]", items.join(","))
    })
}

fn execute(cli: Cli) -> Result<ExitCode, ConfigError> {
    match cli.command {
        Command::Generate { common, out } => {
            let cfg = common.load(Vec::new())?;
            let prob = experiment::load_problem(&cfg)?;
            let stem = out.to_string_lossy().to_string();
            write_matrix_market(format!("{stem}.mtx"), &prob.a)?;
            write_vector(format!("{stem}.rhs"), &prob.rhs)?;
            println!("{} rows, {} nonzeros -> {stem}.mtx, {stem}.rhs", prob.a.n_rows(), prob.a.nnz());
            Ok(ExitCode::SUCCESS)
        }
        Command::Setup(common) => {
            let cfg = common.load(Vec::new())?;
            let prob = experiment::load_problem(&cfg)?;
            let h = experiment::build(&cfg, &prob)?;
            let summary = h.summary();
            let mut out = sink(&cfg)?;
            match cfg.output.format {
                Format::Json => {
                    serde_json::to_writer_pretty(&mut out, &summary).map_err(|e| ConfigError(e.to_string()))?;
                    writeln!(out).map_err(io_err)?;
                }
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(&mut out);
                    w.write_record(["level", "n", "nnz_a", "nnz_p", "nnz_r"]).map_err(|e| ConfigError(e.to_string()))?;
                    for (l, lev) in summary.levels.iter().enumerate() {
                        w.serialize((l, lev.n, lev.nnz_a, lev.nnz_p, lev.nnz_r))
                            .map_err(|e| ConfigError(e.to_string()))?;
                    }
                    w.flush().map_err(io_err)?;
                }
            }
            out.flush().map_err(io_err)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve(common) => {
            let cfg = common.load(Vec::new())?;
            let rec = experiment::run(&cfg)?;
            emit(&cfg, &[rec])
        }
        Command::Sweep {
            common,
            sizes,
            angles,
            sixteenths,
            pre,
            post,
        } => {
            let mut extra = Vec::new();
            if !sizes.is_empty() {
                extra.push(("sweep.sizes".into(), serde_json::to_string(&sizes).unwrap()));
            }
            let angles: Vec<f64> = match sixteenths {
                Some(k) => (0..=k).map(|i| i as f64 * std::f64::consts::PI / 16.0).collect(),
                None => angles,
            };
            if !angles.is_empty() {
                extra.push(("sweep.psi".into(), serde_json::to_string(&angles).unwrap()));
            }
            if let Some(v) = sweep_values(&pre) {
                extra.push(("sweep.prefilter".into(), v));
            }
            if let Some(v) = sweep_values(&post) {
                extra.push(("sweep.postfilter".into(), v));
            }
            let cfg = common.load(extra)?;
            let points = experiment::sweep_points(&cfg);
            for p in &points {
                p.validate()?;
            }
            let records = points.iter().map(experiment::run).collect::<Result<Vec<_>, _>>()?;
            emit(&cfg, &records)
        }
        Command::Verify { seed } => {
            let report = run_lemma_suite(seed)?;
            for c in &report.checks {
                println!(
                    "{}: {} (value {:.3e}, tolerance {:.1e})",
                    c.name,
                    if c.passed { "pass" } else { "FAIL" },
                    c.value,
                    c.tolerance
                );
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Report { input, table } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", input.display())))?;
            let records = experiment::read_records(&text)?;
            print!(
                "{}",
                match table {
                    Table::Filter => experiment::filter_table(&records),
                    Table::Setup => experiment::setup_table(&records),
                }
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("amg: {e}");
            ExitCode::from(1)
        }
    }
}
