//! Relaxation schemes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, AmgError, Result};
use crate::sparse::SparseMatrix;
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxScheme {
    Jacobi,
    /// Forward sweeps before coarse correction, backward sweeps after.
    GaussSeidel,
    SymGaussSeidel,
    /// Gauss-Seidel on the normal equations `A^T A x = A^T b`.
    Gsne,
    BlockSymGaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelaxConfig {
    pub scheme: RelaxScheme,
    /// Relaxation weight; `None` picks `4 / (3 rho(D^{-1}A))` for Jacobi and 1
    /// otherwise.
    pub weight: Option<f64>,
    pub sweeps: usize,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            scheme: RelaxScheme::GaussSeidel,
            weight: None,
            sweeps: 1,
        }
    }
}

impl RelaxConfig {
    pub fn new(scheme: RelaxScheme) -> Self {
        Self {
            scheme,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return invalid("relaxation needs at least one sweep");
        }
        if let Some(w) = self.weight {
            if !(w > 0.0) {
                return invalid(format!("relaxation weight must be positive, got {w}"));
            }
        }
        Ok(())
    }
}

/// Direction of a Gauss-Seidel-type sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Relaxation data prepared for one matrix.
#[derive(Debug, Clone)]
pub struct Smoother {
    pub scheme: RelaxScheme,
    pub omega: f64,
    pub sweeps: usize,
    dinv: Vec<f64>,
    /// `A^T` and squared column norms of `A` (normal-equation relaxation).
    at: Option<SparseMatrix>,
    col_norm2: Vec<f64>,
    /// Row-major inverses of the diagonal blocks.
    block_inv: Vec<f64>,
    m: usize,
}

impl Smoother {
    /// Prepares the smoother; the second value is the multiply count of the
    /// preparation (e.g. the spectral radius estimate for Jacobi).
    pub fn new(a: &SparseMatrix, cfg: &RelaxConfig) -> Result<(Self, u64)> {
        cfg.validate()?;
        if !a.is_square() {
            return invalid("relaxation needs a square matrix");
        }
        let n = a.n_rows();
        let mut ops = 0u64;
        let mut s = Self {
            scheme: cfg.scheme,
            omega: cfg.weight.unwrap_or(1.0),
            sweeps: cfg.sweeps,
            dinv: Vec::new(),
            at: None,
            col_norm2: Vec::new(),
            block_inv: Vec::new(),
            m: 1,
        };
        match cfg.scheme {
            RelaxScheme::Jacobi => {
                s.dinv = spectral::inverse_diagonal(a)?;
                if cfg.weight.is_none() {
                    let (rho, c) = spectral::dinv_a_radius(a)?;
                    ops += c;
                    s.omega = if rho > 0.0 { 4.0 / (3.0 * rho) } else { 1.0 };
                }
            }
            RelaxScheme::GaussSeidel | RelaxScheme::SymGaussSeidel => {
                s.dinv = spectral::inverse_diagonal(a)?;
            }
            RelaxScheme::Gsne => {
                let at = a.transpose();
                s.col_norm2 = (0..n)
                    .map(|j| at.row(j).1.iter().map(|v| v * v).sum())
                    .collect();
                if let Some(j) = s.col_norm2.iter().position(|&c| c == 0.0) {
                    return Err(AmgError::Singular(format!("column {j} of A is zero")));
                }
                ops += a.nnz() as u64;
                s.at = Some(at);
            }
            RelaxScheme::BlockSymGaussSeidel => {
                let m = a.block_size();
                s.m = m;
                s.block_inv = vec![0.0; n * m];
                for bi in 0..n / m {
                    let blk = DMatrix::from_fn(m, m, |r, c| a.get(bi * m + r, bi * m + c));
                    let inv = blk
                        .try_inverse()
                        .ok_or(AmgError::SingularDiagonal(bi * m))?;
                    for r in 0..m {
                        for c in 0..m {
                            s.block_inv[(bi * m + r) * m + c] = inv[(r, c)];
                        }
                    }
                }
                ops += (n * m) as u64;
            }
        }
        Ok((s, ops))
    }

    /// SpMV-equivalent passes over `A` made by one smoothing call with
    /// `sweeps` sweeps.
    pub fn passes(&self, sweeps: usize) -> usize {
        match self.scheme {
            RelaxScheme::Jacobi | RelaxScheme::GaussSeidel => sweeps,
            RelaxScheme::SymGaussSeidel | RelaxScheme::BlockSymGaussSeidel => 2 * sweeps,
            RelaxScheme::Gsne => 1 + 2 * sweeps,
        }
    }

    /// Applies `self.sweeps * times` sweeps. `dir` selects the sweep order for
    /// plain Gauss-Seidel (forward before the coarse correction, backward
    /// after it) and is ignored by the other schemes.
    pub fn smooth(
        &self,
        a: &SparseMatrix,
        x: &mut [f64],
        b: &[f64],
        dir: Direction,
        times: usize,
        scratch: &mut Vec<f64>,
    ) -> usize {
        let sweeps = self.sweeps * times;
        if sweeps == 0 {
            return 0;
        }
        match self.scheme {
            RelaxScheme::Jacobi => {
                scratch.resize(x.len(), 0.0);
                for _ in 0..sweeps {
                    a.residual_into(x, b, scratch);
                    for i in 0..x.len() {
                        x[i] += self.omega * self.dinv[i] * scratch[i];
                    }
                }
            }
            RelaxScheme::GaussSeidel => {
                for _ in 0..sweeps {
                    self.gs_sweep(a, x, b, dir);
                }
            }
            RelaxScheme::SymGaussSeidel => {
                for _ in 0..sweeps {
                    self.gs_sweep(a, x, b, Direction::Forward);
                    self.gs_sweep(a, x, b, Direction::Backward);
                }
            }
            RelaxScheme::BlockSymGaussSeidel => {
                for _ in 0..sweeps {
                    self.block_sweep(a, x, b, Direction::Forward);
                    self.block_sweep(a, x, b, Direction::Backward);
                }
            }
            RelaxScheme::Gsne => {
                let at = self.at.as_ref().expect("prepared for gsne");
                scratch.resize(x.len(), 0.0);
                a.residual_into(x, b, scratch);
                let r = scratch;
                for _ in 0..sweeps {
                    for j in 0..x.len() {
                        let (rows, vals) = at.row(j);
                        let mut s = 0.0;
                        for (&i, &v) in rows.iter().zip(vals) {
                            s += v * r[i];
                        }
                        let delta = self.omega * s / self.col_norm2[j];
                        x[j] += delta;
                        for (&i, &v) in rows.iter().zip(vals) {
                            r[i] -= delta * v;
                        }
                    }
                }
            }
        }
        self.passes(sweeps)
    }

    fn gs_sweep(&self, a: &SparseMatrix, x: &mut [f64], b: &[f64], dir: Direction) {
        let n = x.len();
        let w = self.omega;
        let mut update = |i: usize| {
            let (cols, vals) = a.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                s -= v * x[j];
            }
            x[i] += w * s * self.dinv[i];
        };
        match dir {
            Direction::Forward => (0..n).for_each(&mut update),
            Direction::Backward => (0..n).rev().for_each(&mut update),
        }
    }

    fn block_sweep(&self, a: &SparseMatrix, x: &mut [f64], b: &[f64], dir: Direction) {
        let m = self.m;
        let nb = x.len() / m;
        let mut r = vec![0.0; m];
        let mut update = |bi: usize| {
            for c in 0..m {
                let i = bi * m + c;
                let mut s = b[i];
                for (j, v) in a.row_iter(i) {
                    s -= v * x[j];
                }
                r[c] = s;
            }
            for c in 0..m {
                let i = bi * m + c;
                let inv = &self.block_inv[i * m..(i + 1) * m];
                let d: f64 = inv.iter().zip(&r).map(|(p, q)| p * q).sum();
                x[i] += self.omega * d;
            }
        };
        match dir {
            Direction::Forward => (0..nb).for_each(&mut update),
            Direction::Backward => (0..nb).rev().for_each(&mut update),
        }
    }
}

/// Standalone relaxation: `cfg.sweeps` sweeps of the scheme on `A x = b`
/// (forward order for Gauss-Seidel).
pub fn relax(cfg: &RelaxConfig, a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_dim("relax", a.n_cols(), x.len())?;
    check_dim("relax", a.n_rows(), b.len())?;
    let (s, _) = Smoother::new(a, cfg)?;
    let mut out = x.to_vec();
    let mut scratch = Vec::new();
    s.smooth(a, &mut out, b, Direction::Forward, 1, &mut scratch);
    Ok(out)
}
