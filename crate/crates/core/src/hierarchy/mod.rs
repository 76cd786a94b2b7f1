//! Multigrid hierarchies and the three setup drivers.

mod classical;
mod rootnode;
mod smoothed;

use nalgebra::{DMatrix, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::complexity::{self, Bucket, SetupReport, WorkLedger};
use crate::error::{check_dim, invalid, AmgError, Result};
use crate::interpolation::{CandidateSet, InterpConfig};
use crate::relax::{RelaxConfig, Smoother};
use crate::sparse::SparseMatrix;
use crate::strength::StrengthConfig;

pub use classical::{cf_setup, direct_interpolation, rs_split};
pub use rootnode::rn_setup;
pub use smoothed::{sa_setup, tentative_sa};

/// Relative symmetry threshold used to pick the symmetric setup branch.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest coarsest level that is factored densely.
pub const MAX_DENSE_COARSE: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rn,
    Sa,
    Cf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetupOptions {
    pub max_size: usize,
    pub max_levels: usize,
    pub method: Method,
    pub strength: StrengthConfig,
    pub interp: InterpConfig,
    /// Gauss-Seidel sweeps applied to the candidates on every level.
    pub candidate_sweeps: usize,
    /// Treat the problem as a vector problem with the matrix block size.
    pub vector_flag: bool,
    /// Smoothing steps for the SA prolongation smoother.
    pub sa_smoothing_steps: usize,
    pub relax: RelaxConfig,
}

impl Default for SetupOptions {
    fn default() -> Self {
        Self {
            max_size: 20,
            max_levels: 25,
            method: Method::Rn,
            strength: StrengthConfig::default(),
            interp: InterpConfig::default(),
            candidate_sweeps: 4,
            vector_flag: false,
            sa_smoothing_steps: 1,
            relax: RelaxConfig::default(),
        }
    }
}

impl SetupOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_size == 0 {
            return invalid("max_size must be at least 1");
        }
        if self.max_levels == 0 {
            return invalid("max_levels must be at least 1");
        }
        self.strength.validate()?;
        self.interp.validate()?;
        self.relax.validate()
    }
}

#[derive(Debug, Clone)]
pub struct Level {
    pub a: SparseMatrix,
    pub p: Option<SparseMatrix>,
    pub r: Option<SparseMatrix>,
    /// Candidates on this level after improvement (`P B_c = B` holds for these).
    pub candidates: Option<CandidateSet>,
    /// Coarse candidates `B_c`.
    pub coarse_candidates: Option<CandidateSet>,
    /// Root nodes (RN) or C-points (CF) in fine DOF numbering.
    pub c_points: Option<Vec<usize>>,
}

/// Problems noticed during setup that did not abort it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SetupDiagnostics {
    pub degenerate_aggregates: usize,
    pub inconsistent_rows: usize,
    pub capped_energy_steps: usize,
    pub dropped_candidate_columns: usize,
    pub promoted_f_points: usize,
    /// Interpolation rows given back their unfiltered pattern because the
    /// filtered one could not satisfy the constraints.
    pub restored_rows: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum CoarseSolver {
    Lu(LU<f64, Dyn, Dyn>),
    PseudoInverse(DMatrix<f64>),
}

impl CoarseSolver {
    fn new(a: &SparseMatrix) -> (Self, bool) {
        let d = a.to_dense();
        let scale = d.amax();
        let lu = d.clone().lu();
        let umin = (0..d.nrows())
            .map(|i| lu.u()[(i, i)].abs())
            .fold(f64::INFINITY, f64::min);
        if d.nrows() > 0 && umin > 1e-13 * scale {
            (CoarseSolver::Lu(lu), false)
        } else {
            let pinv = d
                .pseudo_inverse(1e-12 * scale.max(f64::MIN_POSITIVE))
                .unwrap_or_else(|_| DMatrix::zeros(a.n_cols(), a.n_rows()));
            (CoarseSolver::PseudoInverse(pinv), true)
        }
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let rhs = nalgebra::DVector::from_column_slice(b);
        let sol = match self {
            CoarseSolver::Lu(lu) => lu.solve(&rhs).expect("nonsingular by construction"),
            CoarseSolver::PseudoInverse(p) => p * rhs,
        };
        x.copy_from_slice(sol.as_slice());
    }
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    pub ledger: WorkLedger,
    /// `R = P^T` on every level and every `A` symmetric.
    pub symmetric: bool,
    pub block_size: usize,
    pub method: Method,
    /// Coarsening stopped because a level did not shrink.
    pub stagnated: bool,
    /// The coarsest matrix was singular; a pseudo-inverse is used.
    pub coarse_singular: bool,
    pub diagnostics: SetupDiagnostics,
    relax: RelaxConfig,
    pub(crate) smoothers: Vec<Smoother>,
    pub(crate) coarse: CoarseSolver,
}

impl Hierarchy {
    /// Assembles a hierarchy from explicit levels and prepares the
    /// smoothers and the coarsest-level solver (charged to SolveOther).
    pub fn from_levels(
        levels: Vec<Level>,
        ledger: WorkLedger,
        method: Method,
        relax: RelaxConfig,
    ) -> Result<Self> {
        if levels.is_empty() {
            return invalid("a hierarchy needs at least one level");
        }
        let last = levels.len() - 1;
        for (l, lev) in levels.iter().enumerate() {
            if !lev.a.is_square() {
                return invalid(format!("level {l} matrix is not square"));
            }
            if l < last {
                let (Some(p), Some(r)) = (&lev.p, &lev.r) else {
                    return invalid(format!("level {l} lacks P or R"));
                };
                let nc = levels[l + 1].a.n_rows();
                check_dim("hierarchy P rows", lev.a.n_rows(), p.n_rows())?;
                check_dim("hierarchy P cols", nc, p.n_cols())?;
                check_dim("hierarchy R rows", nc, r.n_rows())?;
                check_dim("hierarchy R cols", lev.a.n_rows(), r.n_cols())?;
            } else if lev.p.is_some() || lev.r.is_some() {
                return invalid("the coarsest level must not carry P or R");
            }
        }
        let symmetric = levels.iter().all(|l| {
            l.a.is_symmetric(SYMMETRY_TOL)
                && match (&l.p, &l.r) {
                    (Some(p), Some(r)) => *r == p.transpose(),
                    _ => true,
                }
        });
        let nc = levels[last].a.n_rows();
        if nc > MAX_DENSE_COARSE {
            return Err(AmgError::Structure(format!(
                "coarsest level has {nc} rows, more than the {MAX_DENSE_COARSE} a dense solve allows (coarsening stagnated or max_levels too small)"
            )));
        }
        let (coarse, coarse_singular) = CoarseSolver::new(&levels[last].a);
        let mut h = Self {
            block_size: levels[0].a.block_size(),
            levels,
            ledger,
            symmetric,
            method,
            stagnated: false,
            coarse_singular,
            diagnostics: SetupDiagnostics::default(),
            relax,
            smoothers: Vec::new(),
            coarse,
        };
        h.set_relaxation(relax)?;
        Ok(h)
    }

    /// Replaces the relaxation scheme on every non-coarsest level.
    pub fn set_relaxation(&mut self, relax: RelaxConfig) -> Result<()> {
        let last = self.levels.len() - 1;
        let mut smoothers = Vec::with_capacity(last);
        for lev in &self.levels[..last] {
            let (s, ops) = Smoother::new(&lev.a, &relax)?;
            self.ledger.charge(Bucket::SolveOther, ops);
            smoothers.push(s);
        }
        self.smoothers = smoothers;
        self.relax = relax;
        Ok(())
    }

    pub fn relaxation(&self) -> &RelaxConfig {
        &self.relax
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn operator_complexity(&self) -> f64 {
        complexity::operator_complexity(self)
    }

    pub fn cycle_complexity(&self, nu_pre: usize, nu_post: usize) -> f64 {
        complexity::cycle_complexity(self, nu_pre, nu_post)
    }

    pub fn setup_report(&self) -> SetupReport {
        self.ledger.report()
    }

    pub fn summary(&self) -> HierarchySummary {
        HierarchySummary {
            method: self.method,
            levels: self
                .levels
                .iter()
                .map(|l| LevelSummary {
                    n: l.a.n_rows(),
                    nnz_a: l.a.nnz(),
                    nnz_p: l.p.as_ref().map_or(0, |p| p.nnz()),
                    nnz_r: l.r.as_ref().map_or(0, |r| r.nnz()),
                })
                .collect(),
            setup: self.setup_report(),
            operator_complexity: self.operator_complexity(),
            symmetric: self.symmetric,
            stagnated: self.stagnated,
            diagnostics: self.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub nnz_a: usize,
    pub nnz_p: usize,
    pub nnz_r: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchySummary {
    pub method: Method,
    pub levels: Vec<LevelSummary>,
    pub setup: SetupReport,
    pub operator_complexity: f64,
    pub symmetric: bool,
    pub stagnated: bool,
    pub diagnostics: SetupDiagnostics,
}

/// Dispatches on `opts.method`. `b` defaults to the constant vector; `b_hat`
/// is only used by the non-symmetric root-node and SA paths.
pub fn setup(
    a: &SparseMatrix,
    b: Option<&CandidateSet>,
    b_hat: Option<&CandidateSet>,
    opts: &SetupOptions,
) -> Result<Hierarchy> {
    let ones = CandidateSet::from_element(a.n_rows(), 1, 1.0);
    let b = b.unwrap_or(&ones);
    match opts.method {
        Method::Rn => rn_setup(a, b, b_hat, opts),
        Method::Sa => sa_setup(a, b, b_hat, opts),
        Method::Cf => cf_setup(a, opts),
    }
}

/// Candidate block check shared by the drivers.
pub(crate) fn check_candidates(a: &SparseMatrix, b: &CandidateSet, name: &'static str) -> Result<()> {
    check_dim(name, a.n_rows(), b.nrows())?;
    if b.ncols() == 0 {
        return invalid(format!("{name} needs at least one candidate"));
    }
    if let Some(j) = (0..b.ncols()).find(|&j| b.column(j).amax() == 0.0) {
        return invalid(format!("{name}: candidate {j} is zero"));
    }
    Ok(())
}
