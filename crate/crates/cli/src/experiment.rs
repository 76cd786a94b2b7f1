use std::io::Write;

use amg_core::cycle::solve;
use amg_core::interpolation::{CandidateSet, FilterSpec};
use amg_core::problems::{generate, Problem};
use amg_core::sparse::io::read_matrix_market;
use amg_core::{setup, Hierarchy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, Format, Result};

/// One solved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub kind: String,
    pub n: usize,
    pub unknowns: usize,
    pub psi: f64,
    pub method: String,
    pub degree: usize,
    pub prefilter: Option<f64>,
    pub postfilter: Option<f64>,
    pub levels: usize,
    pub sc: f64,
    pub sc_aggregation: f64,
    pub sc_candidates: f64,
    pub sc_p: f64,
    pub sc_rap: f64,
    pub oc: f64,
    pub cc: f64,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wu_solve: f64,
}

pub fn load_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let Some(path) = &cfg.matrix else {
        return Ok(generate(&cfg.problem)?);
    };
    let a = read_matrix_market(path)?;
    if !a.is_square() {
        return Err(ConfigError(format!("{} is not square", path.display())));
    }
    let n = a.n_rows();
    let ones = CandidateSet::from_element(n, 1, 1.0);
    Ok(Problem {
        b_hat: (!a.is_symmetric(1e-12)).then(|| ones.clone()),
        b: ones,
        rhs: vec![1.0; n],
        a,
    })
}

pub fn build(cfg: &ExperimentConfig, prob: &Problem) -> Result<Hierarchy> {
    Ok(setup(&prob.a, Some(&prob.b), prob.b_hat.as_ref(), &cfg.setup)?)
}

fn rhs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn theta(f: &Option<FilterSpec>) -> Option<f64> {
    f.and_then(|f| f.theta)
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

/// Builds and solves one configuration.
pub fn run(cfg: &ExperimentConfig) -> Result<Record> {
    cfg.validate()?;
    let prob = load_problem(cfg)?;
    let h = build(cfg, &prob)?;
    let b = rhs(prob.a.n_rows(), cfg.seed);
    let (_, rep) = solve(&h, &b, &vec![0.0; b.len()], &cfg.solve)?;
    let s = h.setup_report();
    Ok(Record {
        kind: match cfg.matrix {
            Some(_) => "matrix".into(),
            None => label(&cfg.problem.kind),
        },
        n: if cfg.matrix.is_some() { prob.a.n_rows() } else { cfg.problem.n },
        unknowns: prob.a.n_rows(),
        psi: cfg.problem.psi,
        method: label(&cfg.setup.method),
        degree: cfg.setup.interp.degree,
        prefilter: theta(&cfg.setup.interp.prefilter),
        postfilter: theta(&cfg.setup.interp.postfilter),
        levels: h.n_levels(),
        sc: s.total_sc,
        sc_aggregation: s.aggregation,
        sc_candidates: s.candidates,
        sc_p: s.p,
        sc_rap: s.rap,
        oc: rep.chi_oc,
        cc: rep.chi_cc,
        rho: rep.rho,
        iterations: rep.iterations,
        converged: rep.converged && !rep.diverged,
        wu_solve: rep.work_units_solve,
    })
}

/// Expands the sweep axes into concrete configurations.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<ExperimentConfig> {
    fn axis<T: Clone>(v: &[T], base: T) -> Vec<T> {
        if v.is_empty() {
            vec![base]
        } else {
            v.to_vec()
        }
    }
    let sw = &cfg.sweep;
    let sizes = axis(&sw.sizes, cfg.problem.n);
    let angles = axis(&sw.psi, cfg.problem.psi);
    let pre = axis(&sw.prefilter, theta(&cfg.setup.interp.prefilter));
    let post = axis(&sw.postfilter, theta(&cfg.setup.interp.postfilter));
    let mut out = Vec::new();
    for &n in &sizes {
        for &psi in &angles {
            for &a in &pre {
                for &b in &post {
                    let mut c = cfg.clone();
                    c.problem.n = n;
                    c.problem.psi = psi;
                    c.setup.interp.prefilter = a.map(FilterSpec::theta);
                    c.setup.interp.postfilter = b.map(FilterSpec::theta);
                    c.sweep = Default::default();
                    out.push(c);
                }
            }
        }
    }
    out
}

pub fn write_records(records: &[Record], format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, records)?;
            writeln!(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()
        }
    }
}

pub fn read_records(text: &str) -> Result<Vec<Record>> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| ConfigError(format!("records: {e}")));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| ConfigError(format!("records: {e}")))
}

fn theta_cell(t: Option<f64>) -> String {
    t.map_or("--".into(), |t| format!("{t}"))
}

/// Filtering-study layout: pre/post theta, SC, OC, CC, rho, iterations.
pub fn filter_table(records: &[Record]) -> String {
    let mut s = format!(
        "{:>8} {:>8} {:>9} {:>6} {:>6} {:>6} {:>6}\n",
        "pre", "post", "SC", "OC", "CC", "rho", "its"
    );
    for r in records {
        s += &format!(
            "{:>8} {:>8} {:>9.1} {:>6.2} {:>6.2} {:>6.2} {:>6}\n",
            theta_cell(r.prefilter),
            theta_cell(r.postfilter),
            r.sc,
            r.oc,
            r.cc,
            r.rho,
            r.iterations
        );
    }
    s
}

/// Setup-cost breakdown layout: work units per setup phase.
pub fn setup_table(records: &[Record]) -> String {
    let mut s = format!(
        "{:>16} {:>8} {:>8} {:>11} {:>9} {:>9} {:>9}\n",
        "kind", "n", "method", "aggregation", "candidates", "P", "RAP"
    );
    for r in records {
        s += &format!(
            "{:>16} {:>8} {:>8} {:>11.1} {:>9.1} {:>9.1} {:>9.1}\n",
            r.kind, r.n, r.method, r.sc_aggregation, r.sc_candidates, r.sc_p, r.sc_rap
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use amg_core::problems::ProblemKind;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.problem.kind = ProblemKind::Poisson2d;
        c.problem.n = 16;
        c
    }

    #[test]
    fn sweep_expands_in_axis_order() {
        let mut c = small();
        c.sweep.sizes = vec![8, 16];
        c.sweep.prefilter = vec![None, Some(0.1)];
        let pts = sweep_points(&c);
        let got: Vec<(usize, Option<f64>)> =
            pts.iter().map(|p| (p.problem.n, theta(&p.setup.interp.prefilter))).collect();
        assert_eq!(got, vec![(8, None), (8, Some(0.1)), (16, None), (16, Some(0.1))]);
        assert_eq!(sweep_points(&small()).len(), 1);
    }

    #[test]
    fn records_round_trip_through_csv_and_json() {
        let r = run(&small()).unwrap();
        assert!(r.converged && r.levels > 1 && r.oc >= 1.0);
        for f in [Format::Csv, Format::Json] {
            let mut buf = Vec::new();
            write_records(&[r.clone(), r.clone()], f, &mut buf).unwrap();
            let back = read_records(std::str::from_utf8(&buf).unwrap()).unwrap();
            assert_eq!(back, vec![r.clone(), r.clone()]);
        }
        assert_eq!(filter_table(std::slice::from_ref(&r)).lines().count(), 2);
        assert!(setup_table(&[r]).contains("poisson2d"));
    }
}
