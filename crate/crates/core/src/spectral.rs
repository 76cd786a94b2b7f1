//! Spectral radius estimates by a short Arnoldi iteration.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AmgError, Result};
use crate::sparse::{dot, norm2, SparseMatrix};

/// Krylov steps used for every eigenvalue estimate.
pub const ARNOLDI_STEPS: usize = 15;

const SEED: u64 = 0x5eed;

/// Largest Ritz value magnitude of the operator `apply` after at most
/// `steps` Arnoldi steps from a fixed pseudo-random start vector. Returns
/// the estimate and the number of operator applications used.
pub fn arnoldi_radius(
    n: usize,
    steps: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
) -> (f64, usize) {
    if n == 0 {
        return (0.0, 0);
    }
    let k = steps.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut v0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nrm = norm2(&v0);
    v0.iter_mut().for_each(|x| *x /= nrm);

    let mut basis = vec![v0];
    let mut h = DMatrix::<f64>::zeros(k + 1, k);
    let mut w = vec![0.0; n];
    let mut used = 0;
    let mut dim = k;
    for j in 0..k {
        apply(&basis[j], &mut w);
        used += 1;
        let wnorm0 = norm2(&w);
        // modified Gram-Schmidt with one reorthogonalization pass
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                h[(i, j)] += c;
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = norm2(&w);
        h[(j + 1, j)] = beta;
        if beta <= 1e-12 * wnorm0.max(f64::MIN_POSITIVE) {
            dim = j + 1;
            break;
        }
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    let hk = h.view((0, 0), (dim, dim)).into_owned();
    (hessenberg_radius(hk), used)
}

fn hessenberg_radius(h: DMatrix<f64>) -> f64 {
    let fallback = (0..h.ncols())
        .map(|j| h.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    match nalgebra::linalg::Schur::try_new(h, 1e-14, 10_000) {
        Some(s) => s
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        None => fallback,
    }
}

/// Estimate of `rho(D^{-1} A)` and the multiply count it cost.
pub fn dinv_a_radius(a: &SparseMatrix) -> Result<(f64, u64)> {
    let dinv = inverse_diagonal(a)?;
    let (rho, used) = arnoldi_radius(a.n_rows(), ARNOLDI_STEPS, |x, y| {
        a.spmv_into(x, y);
        y.iter_mut().zip(&dinv).for_each(|(v, d)| *v *= d);
    });
    Ok((rho, (used * a.nnz()) as u64))
}

pub(crate) fn inverse_diagonal(a: &SparseMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(AmgError::Dimension {
            op: "diagonal",
            expected: a.n_rows(),
            found: a.n_cols(),
        });
    }
    a.diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d == 0.0 || !d.is_finite() {
                Err(AmgError::SingularDiagonal(i))
            } else {
                Ok(1.0 / d)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator_exact() {
        let d = [1.0, 3.0, -7.0, 2.0];
        let (rho, used) = arnoldi_radius(4, 15, |x, y| {
            for i in 0..4 {
                y[i] = d[i] * x[i];
            }
        });
        assert!((rho - 7.0).abs() < 1e-10);
        assert!(used <= 4);
    }

    #[test]
    fn poisson_jacobi_radius() {
        let n = 10;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let (rho, ops) = dinv_a_radius(&a).unwrap();
        // eigenvalues of D^{-1}A are 1 - cos(k pi/(n+1))
        let exact = 1.0 + (std::f64::consts::PI / (n + 1) as f64).cos();
        assert!((rho - exact).abs() < 1e-8, "{rho} vs {exact}");
        assert_eq!(ops, (10 * a.nnz()) as u64);
    }

    #[test]
    fn zero_diagonal_rejected() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(dinv_a_radius(&a).is_err());
    }
}
