use super::CandidateSet;
use crate::complexity::{Bucket, WorkLedger};
use crate::error::{check_dim, AmgError, Result};
use crate::hierarchy::SYMMETRY_TOL;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CandidateSmoother {
    /// Forward Gauss-Seidel.
    GaussSeidel,
    Jacobi { omega: f64 },
    /// Forward Gauss-Seidel on `A^T A x = 0`, one column of `A` at a time;
    /// `||A x||` never increases.
    NormalEquations,
}

/// Sweeps shrinking a candidate by more than this factor are undone.
pub const COLLAPSE_RATIO: f64 = 1e-8;

/// Relaxes every candidate on `A x = 0` and rescales the columns to unit
/// 2-norm: forward Gauss-Seidel for symmetric `A`, Gauss-Seidel on the normal
/// equations otherwise (plain Gauss-Seidel does not reduce any norm of a
/// convection-dominated `A` and can inflate oscillatory components).
///
/// A sweep that would shrink a column by more than [`COLLAPSE_RATIO`] is
/// undone and relaxation of that column stops; on a triangular `A` one
/// Gauss-Seidel sweep solves `A x = 0` exactly and would erase the candidate.
pub fn improve_candidates(
    a: &SparseMatrix,
    b: &CandidateSet,
    sweeps: usize,
    ledger: &mut WorkLedger,
) -> Result<CandidateSet> {
    let smoother = if a.is_symmetric(SYMMETRY_TOL) {
        CandidateSmoother::GaussSeidel
    } else {
        CandidateSmoother::NormalEquations
    };
    improve_candidates_with(a, b, sweeps, smoother, ledger)
}

pub fn improve_candidates_with(
    a: &SparseMatrix,
    b: &CandidateSet,
    sweeps: usize,
    smoother: CandidateSmoother,
    ledger: &mut WorkLedger,
) -> Result<CandidateSet> {
    check_dim("improve_candidates", a.n_rows(), b.nrows())?;
    let n = a.n_rows();
    let diag = a.diagonal();
    if sweeps > 0 {
        if let Some(i) = diag.iter().position(|&d| d == 0.0) {
            return Err(AmgError::SingularDiagonal(i));
        }
    }
    let at = (smoother == CandidateSmoother::NormalEquations).then(|| a.transpose());
    let col_norm2: Vec<f64> = match &at {
        Some(at) => (0..n).map(|j| at.row(j).1.iter().map(|v| v * v).sum()).collect(),
        None => Vec::new(),
    };
    if let Some(j) = col_norm2.iter().position(|&c| c == 0.0) {
        return Err(AmgError::Singular(format!("column {j} of A is zero")));
    }
    let mut out = b.clone();
    let mut tmp = vec![0.0; n];
    let mut prev = vec![0.0; n];
    for mut col in out.column_iter_mut() {
        let x = col.as_mut_slice();
        for _ in 0..sweeps {
            prev.copy_from_slice(x);
            let before = norm(x);
            match &at {
                Some(at) => {
                    normal_sweep(a, at, &col_norm2, x, &mut tmp);
                    ledger.charge(Bucket::Candidates, 3 * a.nnz() as u64);
                }
                None => {
                    relax_homogeneous(a, &diag, x, 1, smoother, &mut tmp);
                    ledger.charge_spmv(Bucket::Candidates, a);
                }
            }
            if norm(x) < COLLAPSE_RATIO * before {
                x.copy_from_slice(&prev);
                break;
            }
        }
    }
    for mut col in out.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= nrm;
        }
    }
    Ok(out)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One column-oriented Gauss-Seidel sweep on `A^T A x = 0`.
fn normal_sweep(a: &SparseMatrix, at: &SparseMatrix, col_norm2: &[f64], x: &mut [f64], r: &mut [f64]) {
    a.spmv_into(x, r);
    for j in 0..x.len() {
        let (rows, vals) = at.row(j);
        let s: f64 = rows.iter().zip(vals).map(|(&i, &v)| v * r[i]).sum();
        let delta = -s / col_norm2[j];
        x[j] += delta;
        for (&i, &v) in rows.iter().zip(vals) {
            r[i] += delta * v;
        }
    }
}

fn relax_homogeneous(
    a: &SparseMatrix,
    diag: &[f64],
    x: &mut [f64],
    sweeps: usize,
    smoother: CandidateSmoother,
    tmp: &mut [f64],
) {
    let n = a.n_rows();
    for _ in 0..sweeps {
        match smoother {
            CandidateSmoother::GaussSeidel => {
                for i in 0..n {
                    let mut s = 0.0;
                    for (j, v) in a.row_iter(i) {
                        if j != i {
                            s += v * x[j];
                        }
                    }
                    x[i] = -s / diag[i];
                }
            }
            CandidateSmoother::NormalEquations => unreachable!("handled by normal_sweep"),
            CandidateSmoother::Jacobi { omega } => {
                a.spmv_into(x, tmp);
                for i in 0..n {
                    x[i] -= omega * tmp[i] / diag[i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson(n: usize) -> SparseMatrix {
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

    fn energy(a: &SparseMatrix, x: &[f64]) -> f64 {
        let y = a.spmv(x).unwrap();
        x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>()
    }

    #[test]
    fn zero_sweeps_only_normalizes() {
        let a = poisson(4);
        let b = CandidateSet::from_element(4, 1, 3.0);
        let mut l = WorkLedger::new(a.nnz());
        let out = improve_candidates(&a, &b, 0, &mut l).unwrap();
        assert!(out.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert_eq!(l.total(), 0.0);
    }

    #[test]
    fn jacobi_shrinks_boundary() {
        let a = poisson(8);
        let b = CandidateSet::from_element(8, 1, 1.0);
        let mut l = WorkLedger::new(a.nnz());
        let out = improve_candidates_with(&a, &b, 4, CandidateSmoother::Jacobi { omega: 2.0 / 3.0 }, &mut l)
            .unwrap();
        assert!(out[0] < out[3] && out[7] < out[4]);
        assert_eq!(l.get(Bucket::Candidates), 4.0);
    }

    #[test]
    fn triangular_matrix_keeps_candidate() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 1, -1.0), (2, 2, 2.0)])
            .unwrap();
        let b = CandidateSet::from_element(3, 1, 1.0);
        let mut l = WorkLedger::new(a.nnz());
        let out = improve_candidates_with(&a, &b, 4, CandidateSmoother::GaussSeidel, &mut l).unwrap();
        assert!(out.iter().all(|&v| (v - 1.0 / 3f64.sqrt()).abs() < 1e-15));
        assert_eq!(l.get(Bucket::Candidates), 1.0);
    }

    #[test]
    fn normal_equation_sweeps_reduce_residual() {
        // upwind-like bidiagonal matrix
        let n = 12;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.5));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let at = a.transpose();
        let cn: Vec<f64> = (0..n).map(|j| at.row(j).1.iter().map(|v| v * v).sum()).collect();
        let mut x = vec![1.0; n];
        let mut r = vec![0.0; n];
        let mut prev = f64::INFINITY;
        for _ in 0..5 {
            normal_sweep(&a, &at, &cn, &mut x, &mut r);
            let ax = norm(&a.spmv(&x).unwrap()) / norm(&x);
            assert!(ax <= prev + 1e-14);
            prev = ax;
        }
        let mut l = WorkLedger::new(a.nnz());
        let b = CandidateSet::from_element(n, 1, 1.0);
        let out = improve_candidates(&a, &b, 2, &mut l).unwrap();
        assert!((out.column(0).norm() - 1.0).abs() < 1e-14);
        assert_eq!(l.get(Bucket::Candidates), 6.0);
    }

    #[test]
    fn gauss_seidel_reduces_energy() {
        let a = poisson(10);
        let diag = a.diagonal();
        let mut x: Vec<f64> = (0..10).map(|i| 1.0 + (i as f64 * 1.3).sin()).collect();
        let mut tmp = vec![0.0; 10];
        for _ in 0..5 {
            let before = energy(&a, &x);
            relax_homogeneous(&a, &diag, &mut x, 1, CandidateSmoother::GaussSeidel, &mut tmp);
            assert!(energy(&a, &x) <= before);
        }
    }
}
