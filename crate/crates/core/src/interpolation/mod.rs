//! Construction of root-node interpolation: sparsity pattern growth and
//! filtering, candidate improvement, tentative injection, constraint
//! projection and constrained energy minimization.

mod candidates;
mod constraints;
mod energy;
mod pattern;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sparse::SparseMatrix;

pub use candidates::{improve_candidates, improve_candidates_with, CandidateSmoother};
pub use constraints::{constraint_residual, enforce_constraints, inject_tentative, Tentative};
pub use energy::{energy_minimize, postfilter_pipeline, EnergyResult};
pub use pattern::{prefilter, restore_rows, root_node_pattern, sparsity_pattern};

pub(crate) use constraints::{inject_on_pattern, RowProjector};
pub(crate) use energy::{check_krylov, energy_iterate};
pub(crate) use pattern::sparsity_pattern_counted;

/// Near-null-space candidates, one vector per column.
pub type CandidateSet = DMatrix<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Krylov {
    /// Minimizes the A-energy of every column (A symmetric positive definite).
    Cg,
    /// Minimizes `||A p_j||_2^2`, i.e. the A^T A energy (any nonsingular A).
    Gmres,
}

/// Row-wise magnitude filter parameters (see [`crate::sparse::filter_matrix`]).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterSpec {
    pub theta: Option<f64>,
    pub k: Option<usize>,
}

impl FilterSpec {
    pub fn theta(theta: f64) -> Self {
        Self {
            theta: Some(theta),
            k: None,
        }
    }

    pub fn top_k(k: usize) -> Self {
        Self {
            theta: None,
            k: Some(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterpConfig {
    /// Pattern width `d` in `N = S^d C`.
    pub degree: usize,
    pub prefilter: Option<FilterSpec>,
    pub postfilter: Option<FilterSpec>,
    /// Energy-minimization iterations; `None` means `ceil(1.5 d)`.
    pub energy_iters: Option<usize>,
    pub krylov: Krylov,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self {
            degree: 1,
            prefilter: None,
            postfilter: None,
            energy_iters: None,
            krylov: Krylov::Cg,
        }
    }
}

impl InterpConfig {
    pub fn iterations(&self) -> usize {
        self.energy_iters
            .unwrap_or_else(|| (1.5 * self.degree as f64).ceil() as usize)
            .max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.energy_iters == Some(0) {
            return invalid("energy_iters must be at least 1");
        }
        for f in [self.prefilter, self.postfilter].into_iter().flatten() {
            if let Some(t) = f.theta {
                if !(0.0..=1.0).contains(&t) {
                    return invalid(format!("filter theta {t} outside [0, 1]"));
                }
            }
            if f.k == Some(0) {
                return invalid("filter k must be positive");
            }
        }
        Ok(())
    }
}

/// Values stored on a fixed sparsity pattern; unlike [`SparseMatrix`] the
/// values may be zero.
#[derive(Debug, Clone)]
pub(crate) struct Patterned {
    pub pat: SparseMatrix,
    pub vals: Vec<f64>,
}

impl Patterned {
    /// Values of `src` on the pattern of `pat`; entries of `src` outside the
    /// pattern are discarded.
    pub fn restrict(pat: &SparseMatrix, src: &SparseMatrix) -> Self {
        let mut vals = vec![0.0; pat.nnz()];
        for i in 0..pat.n_rows() {
            let (pc, _) = pat.row(i);
            let (sc, sv) = src.row(i);
            let base = pat.row_offsets()[i];
            let mut q = 0;
            for (p, &c) in pc.iter().enumerate() {
                while q < sc.len() && sc[q] < c {
                    q += 1;
                }
                if q < sc.len() && sc[q] == c {
                    vals[base + p] = sv[q];
                }
            }
        }
        Self {
            pat: pat.clone(),
            vals,
        }
    }

    pub fn zeros(pat: &SparseMatrix) -> Self {
        Self {
            pat: pat.clone(),
            vals: vec![0.0; pat.nnz()],
        }
    }

    #[inline]
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.pat.row_offsets()[i]..self.pat.row_offsets()[i + 1]
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let pat = &self.pat;
        let mut offsets = vec![0];
        let mut cols = Vec::with_capacity(self.vals.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for i in 0..pat.n_rows() {
            let r = self.range(i);
            for p in r {
                if self.vals[p] != 0.0 {
                    cols.push(pat.col_indices()[p]);
                    vals.push(self.vals[p]);
                }
            }
            offsets.push(cols.len());
        }
        SparseMatrix::from_canonical(pat.n_rows(), pat.n_cols(), offsets, cols, vals)
    }
}

/// Entries of `A X` on the pattern of `out`, plus the multiply count.
pub(crate) fn masked_product(a: &SparseMatrix, x: &Patterned, out: &SparseMatrix) -> (Vec<f64>, u64) {
    masked_product_raw(
        a,
        x.pat.row_offsets(),
        x.pat.col_indices(),
        &x.vals,
        x.pat.n_cols(),
        out,
    )
}

pub(crate) fn masked_product_sparse(a: &SparseMatrix, x: &SparseMatrix, out: &SparseMatrix) -> (Vec<f64>, u64) {
    masked_product_raw(a, x.row_offsets(), x.col_indices(), x.values(), x.n_cols(), out)
}

fn masked_product_raw(
    a: &SparseMatrix,
    x_off: &[usize],
    x_cols: &[usize],
    x_vals: &[f64],
    n_cols: usize,
    out: &SparseMatrix,
) -> (Vec<f64>, u64) {
    let mut acc = vec![0.0; n_cols];
    let mut res = vec![0.0; out.nnz()];
    let mut flops = 0u64;
    for i in 0..a.n_rows() {
        let (oc, _) = out.row(i);
        if oc.is_empty() {
            continue;
        }
        for (k, av) in a.row_iter(i) {
            let (s, e) = (x_off[k], x_off[k + 1]);
            flops += (e - s) as u64;
            for p in s..e {
                acc[x_cols[p]] += av * x_vals[p];
            }
        }
        let base = out.row_offsets()[i];
        for (p, &c) in oc.iter().enumerate() {
            res[base + p] = acc[c];
        }
        // reset only what was touched
        for (k, _) in a.row_iter(i) {
            for p in x_off[k]..x_off[k + 1] {
                acc[x_cols[p]] = 0.0;
            }
        }
    }
    (res, flops)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_iterations() {
        let mut c = InterpConfig::default();
        assert_eq!(c.iterations(), 2);
        c.degree = 4;
        assert_eq!(c.iterations(), 6);
        c.degree = 3;
        assert_eq!(c.iterations(), 5);
        c.energy_iters = Some(1);
        assert_eq!(c.iterations(), 1);
    }

    #[test]
    fn masked_product_matches_dense() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 1, -1.0), (1, 2, 3.0), (2, 0, 1.0)])
            .unwrap();
        let x = SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, 2.0), (2, 0, -1.0), (2, 1, 1.0)])
            .unwrap();
        let full = a.matmul(&x).unwrap();
        let mask = SparseMatrix::from_triplets(3, 2, &[(0, 1, 1.0), (1, 0, 1.0), (2, 0, 1.0)]).unwrap();
        let (vals, flops) = masked_product(&a, &Patterned::restrict(&x, &x), &mask);
        assert_eq!(vals, vec![full.get(0, 1), full.get(1, 0), full.get(2, 0)]);
        assert_eq!(flops, a.matmul_flops(&x));
    }
}
