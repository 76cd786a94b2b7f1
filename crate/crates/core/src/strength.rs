//! Strength-of-connection measures.
//!
//! Every measure returns a square matrix whose stored off-diagonal entries
//! are the strong connections of each row, with a non-negative raw strength
//! value, and whose diagonal is always stored (value 1).

use serde::{Deserialize, Serialize};

use crate::complexity::{Bucket, WorkLedger};
use crate::error::{invalid, AmgError, Result};
use crate::sparse::SparseMatrix;
use crate::hierarchy::SYMMETRY_TOL;
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Classical,
    Symmetric,
    Evolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionWeighting {
    /// `W = rho(D^{-1}A) D`, with the radius from a short Arnoldi run.
    Spectral,
    /// `W = diag(sum_j |A_ij|)`; no eigenvalue estimate needed.
    L1Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrengthConfig {
    pub measure: Measure,
    /// Threshold theta for classical/symmetric; ratio bound for evolution.
    pub drop_tol: f64,
    pub evolution_steps: usize,
    pub evolution_weighting: EvolutionWeighting,
}

impl Default for StrengthConfig {
    fn default() -> Self {
        Self {
            measure: Measure::Evolution,
            drop_tol: 4.0,
            evolution_steps: 2,
            evolution_weighting: EvolutionWeighting::Spectral,
        }
    }
}

impl StrengthConfig {
    pub fn classical(theta: f64) -> Self {
        Self {
            measure: Measure::Classical,
            drop_tol: theta,
            ..Self::default()
        }
    }

    pub fn symmetric(theta: f64) -> Self {
        Self {
            measure: Measure::Symmetric,
            drop_tol: theta,
            ..Self::default()
        }
    }

    pub fn evolution(drop_tol: f64, weighting: EvolutionWeighting) -> Self {
        Self {
            measure: Measure::Evolution,
            drop_tol,
            evolution_weighting: weighting,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.drop_tol >= 0.0) {
            return invalid(format!("drop_tol must be non-negative, got {}", self.drop_tol));
        }
        if self.evolution_steps == 0 {
            return invalid("evolution_steps must be at least 1");
        }
        match self.measure {
            Measure::Classical | Measure::Symmetric if self.drop_tol > 1.0 => {
                invalid(format!("theta {} outside [0, 1]", self.drop_tol))
            }
            Measure::Evolution if self.drop_tol < 1.0 => {
                invalid(format!("evolution drop_tol {} must be at least 1", self.drop_tol))
            }
            _ => Ok(()),
        }
    }
}

/// Dispatches on `cfg.measure`, charging the Aggregation bucket.
pub fn strength_of_connection(
    a: &SparseMatrix,
    cfg: &StrengthConfig,
    ledger: &mut WorkLedger,
) -> Result<SparseMatrix> {
    cfg.validate()?;
    match cfg.measure {
        Measure::Classical => {
            ledger.charge_spmv(Bucket::Aggregation, a);
            classical_strength(a, cfg.drop_tol)
        }
        Measure::Symmetric => {
            ledger.charge_spmv(Bucket::Aggregation, a);
            symmetric_strength(a, cfg.drop_tol)
        }
        Measure::Evolution => evolution_strength_counted(a, cfg, ledger),
    }
}

fn check_square(a: &SparseMatrix) -> Result<()> {
    if !a.is_square() {
        return invalid(format!(
            "strength needs a square matrix, got {}x{}",
            a.n_rows(),
            a.n_cols()
        ));
    }
    Ok(())
}

/// Builds a strength matrix row by row; `strong(i, j, v)` returns the raw
/// strength of off-diagonal entry `(i, j)` or `None` if it is weak.
fn build(
    a: &SparseMatrix,
    mut strong: impl FnMut(usize, usize, f64) -> Option<f64>,
) -> SparseMatrix {
    let n = a.n_rows();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(a.nnz());
    let mut vals = Vec::with_capacity(a.nnz());
    offsets.push(0);
    for i in 0..n {
        let mut diag_done = false;
        for (j, v) in a.row_iter(i) {
            if j > i && !diag_done {
                cols.push(i);
                vals.push(1.0);
                diag_done = true;
            }
            if j == i {
                cols.push(i);
                vals.push(1.0);
                diag_done = true;
            } else if let Some(s) = strong(i, j, v) {
                if s > 0.0 {
                    cols.push(j);
                    vals.push(s);
                }
            }
        }
        if !diag_done {
            cols.push(i);
            vals.push(1.0);
        }
        offsets.push(cols.len());
    }
    SparseMatrix::from_canonical(n, n, offsets, cols, vals)
}

/// Classical measure: `(i, j)` strong iff `-A_ij >= theta * max_{k!=i}(-A_ik)`
/// and `-A_ij > 0`; stores `-A_ij`.
pub fn classical_strength(a: &SparseMatrix, theta: f64) -> Result<SparseMatrix> {
    check_square(a)?;
    if !(0.0..=1.0).contains(&theta) {
        return invalid(format!("theta {theta} outside [0, 1]"));
    }
    let row_max: Vec<f64> = (0..a.n_rows())
        .map(|i| {
            a.row_iter(i)
                .filter(|&(j, _)| j != i)
                .fold(0.0f64, |m, (_, v)| m.max(-v))
        })
        .collect();
    Ok(build(a, |i, _, v| {
        let s = -v;
        (s > 0.0 && s >= theta * row_max[i]).then_some(s)
    }))
}

/// Symmetric measure: `(i, j)` strong iff `|A_ij| / sqrt(A_ii A_jj) >= theta`;
/// stores the scaled magnitude.
pub fn symmetric_strength(a: &SparseMatrix, theta: f64) -> Result<SparseMatrix> {
    check_square(a)?;
    if !(0.0..=1.0).contains(&theta) {
        return invalid(format!("theta {theta} outside [0, 1]"));
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return invalid(format!("symmetric strength needs a positive diagonal (row {i})"));
    }
    let sq: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
    Ok(build(a, |i, j, v| {
        let s = v.abs() / (sq[i] * sq[j]);
        (s >= theta).then_some(s)
    }))
}

/// Evolution measure. The unit vector at `i` is propagated by
/// `evolution_steps` applications of `M = I - W^{-1}A`; the magnitudes of the
/// evolved vector on the neighbours of `i` in the graph of `A` are the raw
/// strengths, and `j` is strong iff `|z_j| >= max_{k!=i} |z_k| / drop_tol`.
/// Non-symmetric matrices use `(|E_ij| + |E_ji|) / 2` on the pattern of
/// `|A| + |A|^T` instead.
pub fn evolution_strength(a: &SparseMatrix, cfg: &StrengthConfig) -> Result<SparseMatrix> {
    let mut scratch = WorkLedger::new(a.nnz());
    evolution_strength_counted(a, cfg, &mut scratch)
}

fn evolution_strength_counted(
    a: &SparseMatrix,
    cfg: &StrengthConfig,
    ledger: &mut WorkLedger,
) -> Result<SparseMatrix> {
    check_square(a)?;
    cfg.validate()?;
    let n = a.n_rows();
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| d == 0.0) {
        return Err(AmgError::SingularDiagonal(i));
    }
    let winv: Vec<f64> = match cfg.evolution_weighting {
        EvolutionWeighting::Spectral => {
            let (rho, ops) = spectral::dinv_a_radius(a)?;
            ledger.charge(Bucket::Aggregation, ops);
            let rho = if rho > 0.0 { rho } else { 1.0 };
            diag.iter().map(|d| 1.0 / (rho * d)).collect()
        }
        EvolutionWeighting::L1Jacobi => (0..n)
            .map(|i| 1.0 / a.row_iter(i).map(|(_, v)| v.abs()).sum::<f64>())
            .collect(),
    };
    // M = I - W^{-1} A
    let scaled = a.map_values(|i, _, v| -winv[i] * v);
    let m = scaled.add_scaled(1.0, &SparseMatrix::identity(n), 1.0)?;
    ledger.charge_spmv(Bucket::Aggregation, a);

    let mut e = m.clone();
    for _ in 1..cfg.evolution_steps {
        ledger.charge(Bucket::Aggregation, e.matmul_flops(&m));
        e = e.matmul(&m)?;
    }
    // column i of E is the evolved unit vector of node i
    let et = e.transpose();
    ledger.charge_spmv(Bucket::Aggregation, a);
    // For non-symmetric A the measure is symmetrized on the pattern of
    // |A| + |A|^T; otherwise a one-sided (e.g. upwind) coupling never sees
    // the evolved vector, which only travels downstream.
    let symmetric = a.is_symmetric(SYMMETRY_TOL);
    let graph = if symmetric {
        a.clone()
    } else {
        let abs = a.map_values(|_, _, v| v.abs());
        ledger.charge_spmv(Bucket::Aggregation, a);
        abs.add_scaled(1.0, &abs.transpose(), 1.0)?
    };
    let raw = |i: usize, j: usize| {
        if symmetric {
            et.get(i, j).abs()
        } else {
            0.5 * (et.get(i, j).abs() + e.get(i, j).abs())
        }
    };

    let mut z = Vec::new();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(a.nnz());
    let mut vals = Vec::with_capacity(a.nnz());
    offsets.push(0);
    for i in 0..n {
        z.clear();
        z.extend(
            graph
                .row(i)
                .0
                .iter()
                .map(|&j| (j, if j == i { 1.0 } else { raw(i, j) })),
        );
        let max = z
            .iter()
            .filter(|&&(j, _)| j != i)
            .fold(0.0f64, |m, &(_, v)| m.max(v));
        let threshold = max / cfg.drop_tol;
        let mut diag_done = false;
        for &(j, v) in &z {
            if j > i && !diag_done {
                cols.push(i);
                vals.push(1.0);
                diag_done = true;
            }
            if j == i {
                diag_done = true;
                cols.push(i);
                vals.push(1.0);
            } else if v > 0.0 && v >= threshold {
                cols.push(j);
                vals.push(v);
            }
        }
        if !diag_done {
            cols.push(i);
            vals.push(1.0);
        }
        offsets.push(cols.len());
    }
    Ok(SparseMatrix::from_canonical(n, n, offsets, cols, vals))
}

/// Scales each row so that its largest off-diagonal entry is 1 and sets the
/// diagonal to 1.
pub fn normalize_strength(s: &SparseMatrix) -> Result<SparseMatrix> {
    check_square(s)?;
    if let Some(v) = s.values().iter().find(|&&v| v < 0.0) {
        return invalid(format!("strength values must be non-negative, found {v}"));
    }
    let n = s.n_rows();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(s.nnz() + n);
    let mut vals = Vec::with_capacity(s.nnz() + n);
    offsets.push(0);
    for i in 0..n {
        let max = s
            .row_iter(i)
            .filter(|&(j, _)| j != i)
            .fold(0.0f64, |m, (_, v)| m.max(v));
        let mut diag_done = false;
        for (j, v) in s.row_iter(i) {
            if j > i && !diag_done {
                cols.push(i);
                vals.push(1.0);
                diag_done = true;
            }
            if j == i {
                cols.push(i);
                vals.push(1.0);
                diag_done = true;
            } else {
                cols.push(j);
                vals.push(v / max);
            }
        }
        if !diag_done {
            cols.push(i);
            vals.push(1.0);
        }
        offsets.push(cols.len());
    }
    Ok(SparseMatrix::from_canonical(n, n, offsets, cols, vals))
}

/// Nodal strength for block size `m`: entry `(I, J)` is the largest `|S|`
/// over the `m x m` block.
pub fn amalgamate(s: &SparseMatrix, m: usize) -> Result<SparseMatrix> {
    if m == 0 || !s.n_rows().is_multiple_of(m) || !s.n_cols().is_multiple_of(m) {
        return invalid(format!(
            "block size {m} does not divide {}x{}",
            s.n_rows(),
            s.n_cols()
        ));
    }
    if m == 1 {
        return Ok(s.clone());
    }
    let (nr, nc) = (s.n_rows() / m, s.n_cols() / m);
    let mut acc = vec![0.0f64; nc];
    let mut seen = vec![usize::MAX; nc];
    let mut touched = Vec::new();
    let mut offsets = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for bi in 0..nr {
        touched.clear();
        for i in bi * m..(bi + 1) * m {
            for (j, v) in s.row_iter(i) {
                let bj = j / m;
                if seen[bj] != bi {
                    seen[bj] = bi;
                    acc[bj] = 0.0;
                    touched.push(bj);
                }
                acc[bj] = acc[bj].max(v.abs());
            }
        }
        touched.sort_unstable();
        for &bj in &touched {
            if acc[bj] != 0.0 {
                cols.push(bj);
                vals.push(acc[bj]);
            }
        }
        offsets.push(cols.len());
    }
    Ok(SparseMatrix::from_canonical(nr, nc, offsets, cols, vals))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn classical_examples() {
        let s = classical_strength(&tridiag(5), 0.25).unwrap();
        for i in 1..4 {
            assert_eq!(s.row_nnz(i), 3);
        }
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (0, 1, -1.0), (0, 2, -0.2), (1, 1, 1.0), (2, 2, 1.0)],
        )
        .unwrap();
        let s = classical_strength(&a, 0.5).unwrap();
        assert_eq!(s.row(0).0, &[0, 1]);
        let pos = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)])
            .unwrap();
        assert_eq!(classical_strength(&pos, 0.0).unwrap(), SparseMatrix::identity(2));
    }

    #[test]
    fn symmetric_examples() {
        let a = tridiag(4);
        assert!(symmetric_strength(&a, 0.0).unwrap().same_pattern(&a));
        let b = SparseMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 4.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 4.0)],
        )
        .unwrap();
        assert_eq!(symmetric_strength(&b, 0.3).unwrap(), SparseMatrix::identity(2));
        assert_eq!(symmetric_strength(&b, 0.25).unwrap().nnz(), 4);
        let neg = SparseMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap();
        assert!(symmetric_strength(&neg, 0.1).is_err());
    }

    #[test]
    fn evolution_1d_nearest_neighbours() {
        let a = tridiag(9);
        for w in [EvolutionWeighting::Spectral, EvolutionWeighting::L1Jacobi] {
            let s = evolution_strength(&a, &StrengthConfig::evolution(4.0, w)).unwrap();
            assert!(s.same_pattern(&a));
            assert!(s.is_symmetric(1e-10) || w == EvolutionWeighting::L1Jacobi);
        }
        let d = SparseMatrix::identity(4).map_values(|_, _, _| 3.0);
        let s = evolution_strength(&d, &StrengthConfig::default()).unwrap();
        assert_eq!(s, SparseMatrix::identity(4));
    }

    #[test]
    fn l1_has_no_eigen_estimate() {
        let a = tridiag(50);
        let mut spec = WorkLedger::new(a.nnz());
        let mut l1 = WorkLedger::new(a.nnz());
        let cfg = StrengthConfig::default();
        strength_of_connection(&a, &cfg, &mut spec).unwrap();
        let cfg_l1 = StrengthConfig::evolution(4.0, EvolutionWeighting::L1Jacobi);
        strength_of_connection(&a, &cfg_l1, &mut l1).unwrap();
        let diff = spec.get(Bucket::Aggregation) - l1.get(Bucket::Aggregation);
        assert!((diff - spectral::ARNOLDI_STEPS as f64).abs() < 1e-12);
    }

    #[test]
    fn normalize_and_amalgamate() {
        let s = SparseMatrix::from_triplets(3, 3, &[(0, 0, 5.0), (0, 1, 2.0), (0, 2, 4.0)]).unwrap();
        let nrm = normalize_strength(&s).unwrap();
        assert_eq!(nrm.row(0).1, &[1.0, 0.5, 1.0]);
        assert_eq!(nrm.get(1, 1), 1.0);
        assert!(normalize_strength(&s.map_values(|_, _, v| -v)).is_err());

        let b = SparseMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 1.0), (0, 1, 3.0), (1, 0, -2.0), (2, 2, 7.0), (3, 2, 1.0)],
        )
        .unwrap();
        let nodal = amalgamate(&b, 2).unwrap();
        assert_eq!(nodal.to_dense(), nalgebra::DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 7.0]));
        assert_eq!(amalgamate(&b, 1).unwrap(), b);
        assert!(amalgamate(&b, 3).is_err());
    }
}
