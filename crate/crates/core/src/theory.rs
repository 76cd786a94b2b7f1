//! Dense reference computations for small problems: ideal interpolation,
//! approximation-property measures, two-grid error norms, constraint
//! errors, the energy-minimization/ideal-interpolation equivalence and the
//! asymptotic convergence fit.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, AmgError, Result};

/// Largest problem size accepted by the dense routines.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfPartition {
    pub c_points: Vec<usize>,
    pub f_points: Vec<usize>,
}

impl CfPartition {
    /// Partition with the given C-points (in that order); the F-points are
    /// the remaining indices in ascending order.
    pub fn from_c_points(n: usize, c_points: Vec<usize>) -> Result<Self> {
        let mut is_c = vec![false; n];
        for &c in &c_points {
            if c >= n {
                return invalid(format!("C-point {c} out of range for n = {n}"));
            }
            if is_c[c] {
                return invalid(format!("C-point {c} listed twice"));
            }
            is_c[c] = true;
        }
        let f_points = (0..n).filter(|&i| !is_c[i]).collect();
        Ok(Self { c_points, f_points })
    }

    pub fn n(&self) -> usize {
        self.c_points.len() + self.f_points.len()
    }

    /// `u_c`, the C-point restriction, as an `n_c x n` selection matrix.
    pub fn restriction(&self) -> DMatrix<f64> {
        let mut pi = DMatrix::zeros(self.c_points.len(), self.n());
        for (k, &c) in self.c_points.iter().enumerate() {
            pi[(k, c)] = 1.0;
        }
        pi
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return invalid(format!("partition covers {} of {n} points", self.n()));
        }
        let mut seen = vec![false; n];
        for &i in self.c_points.iter().chain(&self.f_points) {
            if i >= n || seen[i] {
                return invalid("C and F must partition 0..n");
            }
            seen[i] = true;
        }
        Ok(())
    }
}

fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

fn check_square_dense(a: &DMatrix<f64>) -> Result<usize> {
    if !a.is_square() {
        return invalid(format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols()));
    }
    if a.nrows() > DENSE_LIMIT {
        return invalid(format!("dense routines are limited to n <= {DENSE_LIMIT}"));
    }
    Ok(a.nrows())
}

fn cholesky_spd(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    check_square_dense(a)?;
    let scale = a.amax().max(f64::MIN_POSITIVE);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return invalid("matrix is not symmetric");
    }
    a.clone()
        .cholesky()
        .ok_or_else(|| AmgError::InvalidArgument("matrix is not positive definite".into()))
}

fn largest_sym_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.max()
}

/// `[-A_ff^{-1} A_fc; I]` in natural row order (columns follow
/// `part.c_points`), together with `W` and the Schur complement
/// `A_cc - A_cf A_ff^{-1} A_fc`.
#[derive(Debug, Clone)]
pub struct IdealInterpolation {
    pub p: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub schur: DMatrix<f64>,
}

pub fn ideal_interpolation(a: &DMatrix<f64>, part: &CfPartition) -> Result<IdealInterpolation> {
    let n = check_square_dense(a)?;
    part.check(n)?;
    let (c, f) = (&part.c_points, &part.f_points);
    let aff = submatrix(a, f, f);
    let afc = submatrix(a, f, c);
    let acf = submatrix(a, c, f);
    let acc = submatrix(a, c, c);
    let w = if f.is_empty() {
        DMatrix::zeros(0, c.len())
    } else {
        let lu = aff.clone().lu();
        let scale = aff.amax().max(f64::MIN_POSITIVE);
        let umin = (0..f.len()).map(|i| lu.u()[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if umin <= 1e-14 * scale {
            return Err(AmgError::Singular("A_ff is singular".into()));
        }
        -lu.solve(&afc).ok_or_else(|| AmgError::Singular("A_ff is singular".into()))?
    };
    let schur = &acc + &acf * &w;
    let mut p = DMatrix::zeros(n, c.len());
    for (k, &i) in f.iter().enumerate() {
        p.row_mut(i).copy_from(&w.row(k));
    }
    for (k, &i) in c.iter().enumerate() {
        p[(i, k)] = 1.0;
    }
    Ok(IdealInterpolation { p, w, schur })
}

fn check_p(a: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != a.nrows() {
        return invalid(format!("P has {} rows, A has {}", p.nrows(), a.nrows()));
    }
    Ok(())
}

/// `mu(P) = max ||u - P u_c||^2 / ||u||_A^2`.
pub fn wap_measure(a: &DMatrix<f64>, p: &DMatrix<f64>, part: &CfPartition) -> Result<f64> {
    let chol = cholesky_spd(a)?;
    check_p(a, p)?;
    part.check(a.nrows())?;
    let e = DMatrix::identity(a.nrows(), a.nrows()) - p * part.restriction();
    // u = L^{-T} v turns the quotient into an ordinary Rayleigh quotient
    let linv_t = chol.l().transpose().try_inverse().expect("Cholesky factor is invertible");
    let x = &e * &linv_t;
    Ok(largest_sym_eig(&(x.transpose() * x)))
}

/// `mu_hat(P) = max ||u - P u_c||_A^2 / ||A u||^2`.
pub fn sap_measure(a: &DMatrix<f64>, p: &DMatrix<f64>, part: &CfPartition) -> Result<f64> {
    let chol = cholesky_spd(a)?;
    check_p(a, p)?;
    part.check(a.nrows())?;
    let n = a.nrows();
    let e = DMatrix::identity(n, n) - p * part.restriction();
    // u = A^{-1} v
    let x = e * chol.inverse();
    Ok(largest_sym_eig(&(x.transpose() * a * x)))
}

/// The minimizer of `mu_hat` over `P = [W; I]` in closed form: ideal
/// interpolation for `A^2`, i.e.
/// `W = -(A_ff^2 + A_fc A_cf)^{-1} (A_ff A_fc + A_fc A_cc)`.
pub fn sap_closed_form(a: &DMatrix<f64>, part: &CfPartition) -> Result<DMatrix<f64>> {
    check_square_dense(a)?;
    part.check(a.nrows())?;
    let (c, f) = (&part.c_points, &part.f_points);
    let aff = submatrix(a, f, f);
    let afc = submatrix(a, f, c);
    let acf = submatrix(a, c, f);
    let acc = submatrix(a, c, c);
    let lhs = &aff * &aff + &afc * &acf;
    let rhs = &aff * &afc + &afc * &acc;
    lhs.lu()
        .solve(&rhs)
        .map(|x| -x)
        .ok_or_else(|| AmgError::Singular("A_ff^2 + A_fc A_cf is singular".into()))
}

/// Numerical minimization of `mu_hat` over `W`.
///
/// With `X = A^{-1}`, `mu_hat([W; I]) = lambda_max(Y^T A_ff Y)` where
/// `Y = X_f - W X_c`. The trace `tr(Y^T A_ff Y)` is a strictly convex
/// quadratic in `W` whose minimizer also minimizes `Y^T A_ff Y` in the
/// Loewner order, hence `mu_hat`; it is found by conjugate gradients on
/// `vec(W)` without forming any block inverse.
pub fn sap_argmin(a: &DMatrix<f64>, part: &CfPartition) -> Result<DMatrix<f64>> {
    let chol = cholesky_spd(a)?;
    part.check(a.nrows())?;
    let (c, f) = (&part.c_points, &part.f_points);
    let x = chol.inverse();
    let xf = submatrix(&x, f, &(0..a.nrows()).collect::<Vec<_>>());
    let xc = submatrix(&x, c, &(0..a.nrows()).collect::<Vec<_>>());
    let aff = submatrix(a, f, f);
    let g = &xc * xc.transpose();
    // gradient/2 of tr((X_f - W X_c)^T A_ff (X_f - W X_c)): A_ff (W G - X_f X_c^T)
    let op = |w: &DMatrix<f64>| &aff * w * &g;
    let rhs = &aff * &xf * xc.transpose();
    let mut w = DMatrix::zeros(f.len(), c.len());
    let mut r = &rhs - op(&w);
    let mut d = r.clone();
    let mut rr = r.norm_squared();
    let stop = 1e-30 * rhs.norm_squared().max(f64::MIN_POSITIVE);
    for _ in 0..10 * (f.len() * c.len()).max(1) {
        if rr <= stop {
            break;
        }
        let q = op(&d);
        let alpha = rr / d.dot(&q);
        w += alpha * &d;
        r -= alpha * &q;
        let rr_new = r.norm_squared();
        d = &r + (rr_new / rr) * &d;
        rr = rr_new;
    }
    Ok(w)
}

/// `[W; I]` in natural order for a given `W` (rows follow `part.f_points`).
pub fn assemble_p(w: &DMatrix<f64>, part: &CfPartition) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(part.n(), part.c_points.len());
    for (k, &i) in part.f_points.iter().enumerate() {
        p.row_mut(i).copy_from(&w.row(k));
    }
    for (k, &i) in part.c_points.iter().enumerate() {
        p[(i, k)] = 1.0;
    }
    p
}

fn sym_sqrt(a: &DMatrix<f64>, power: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).powf(power)));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Weighted Jacobi propagator `I - omega D^{-1} A`.
pub fn jacobi_propagator(a: &DMatrix<f64>, omega: f64) -> Result<DMatrix<f64>> {
    let n = check_square_dense(a)?;
    let mut g = DMatrix::identity(n, n);
    for i in 0..n {
        if a[(i, i)] == 0.0 {
            return Err(AmgError::SingularDiagonal(i));
        }
        for j in 0..n {
            g[(i, j)] -= omega * a[(i, j)] / a[(i, i)];
        }
    }
    Ok(g)
}

/// `|| G^{nu_post} (I - P (P^T A P)^{-1} P^T A) G^{nu_pre} ||_A`.
pub fn two_grid_error_norm(
    a: &DMatrix<f64>,
    p: &DMatrix<f64>,
    g: &DMatrix<f64>,
    nu_pre: usize,
    nu_post: usize,
) -> Result<f64> {
    cholesky_spd(a)?;
    check_p(a, p)?;
    let e = two_grid_operator(a, p, g, nu_pre, nu_post)?;
    let half = sym_sqrt(a, 0.5);
    let mhalf = sym_sqrt(a, -0.5);
    Ok((half * e * mhalf).singular_values().max())
}

/// The two-grid error propagator itself.
pub fn two_grid_operator(
    a: &DMatrix<f64>,
    p: &DMatrix<f64>,
    g: &DMatrix<f64>,
    nu_pre: usize,
    nu_post: usize,
) -> Result<DMatrix<f64>> {
    let n = check_square_dense(a)?;
    check_p(a, p)?;
    let pt = p.transpose();
    let ac = &pt * a * p;
    let lu = ac.clone().lu();
    let scale = ac.amax().max(f64::MIN_POSITIVE);
    let umin = (0..ac.nrows()).map(|i| lu.u()[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if ac.nrows() > 0 && umin <= 1e-14 * scale {
        return Err(AmgError::Singular("P^T A P is singular".into()));
    }
    let cgc = DMatrix::identity(n, n) - p * lu.solve(&(&pt * a)).expect("checked nonsingular");
    Ok(g.pow(nu_post as u32) * cgc * g.pow(nu_pre as u32))
}

/// `e_B = (I - P P^+) B`.
pub fn constraint_error(p: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if p.nrows() != b.nrows() {
        return invalid(format!("P has {} rows, B has {}", p.nrows(), b.nrows()));
    }
    let svd = p.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let pinv = svd.pseudo_inverse(tol).map_err(|e| AmgError::Singular(e.into()))?;
    Ok(b - p * (pinv * b))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// Per column, `max |w_weak - w_lsq|`.
    pub discrepancies: Vec<f64>,
    /// Columns whose restricted system was singular.
    pub degenerate: Vec<usize>,
    pub max_discrepancy: f64,
    pub passed: bool,
}

pub const EQUIVALENCE_TOL: f64 = 1e-8;

/// For every coarse column `l` with allowed F-rows `pattern[l]` (natural
/// indices), solves the restricted energy problem
/// `A_ff[S, S] w = -A_fc[S, l]` and, independently, the least-squares problem
/// `min ||p - P_ideal e_l||_A` over the same pattern, and compares the two.
pub fn verify_energymin_equivalence(
    a: &DMatrix<f64>,
    part: &CfPartition,
    pattern: &[Vec<usize>],
) -> Result<EquivalenceReport> {
    let chol = cholesky_spd(a)?;
    part.check(a.nrows())?;
    if pattern.len() != part.c_points.len() {
        return invalid("one pattern set per C-point is required");
    }
    let n = a.nrows();
    let is_f: Vec<bool> = {
        let mut v = vec![false; n];
        part.f_points.iter().for_each(|&i| v[i] = true);
        v
    };
    let ideal = ideal_interpolation(a, part)?;
    let lt = chol.l().transpose();
    let mut discrepancies = Vec::with_capacity(pattern.len());
    let mut degenerate = Vec::new();
    for (l, rows) in pattern.iter().enumerate() {
        if rows.iter().any(|&i| i >= n || !is_f[i]) {
            return invalid(format!("pattern of column {l} contains a non-F row"));
        }
        let c = part.c_points[l];
        if rows.is_empty() {
            discrepancies.push(0.0);
            continue;
        }
        // energy route
        let k = submatrix(a, rows, rows);
        let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&i| -a[(i, c)]));
        let Some(kc) = k.cholesky() else {
            degenerate.push(l);
            discrepancies.push(f64::NAN);
            continue;
        };
        let w_energy = kc.solve(&rhs);
        // distance-to-ideal route: min || L^T (Z w + e_c - p_ideal) ||
        let z = DMatrix::from_fn(n, rows.len(), |i, j| if rows[j] == i { 1.0 } else { 0.0 });
        let mut target = ideal.p.column(l).clone_owned();
        target[c] -= 1.0;
        let m = &lt * z;
        let t = &lt * target;
        let svd = m.svd(true, true);
        let w_lsq = svd.solve(&t, 1e-14).map_err(|e| AmgError::Singular(e.into()))?;
        discrepancies.push((w_energy - w_lsq).amax());
    }
    let max_discrepancy = discrepancies.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        passed: max_discrepancy <= EQUIVALENCE_TOL,
        discrepancies,
        degenerate,
        max_discrepancy,
    })
}

/// Approximation constants with the optimal coarse vector:
/// `K_wap = ||A|| max ||u - Q u||^2 / ||u||_A^2` (`Q` the l2 projection onto
/// range(P)) and `K_sap = ||A|| max ||u - Pi u||_A^2 / ||A u||^2` (`Pi` the
/// A-orthogonal projection).
pub fn wap_constant(a: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky_spd(a)?;
    check_p(a, p)?;
    let n = a.nrows();
    let q = p.clone().svd(true, false);
    let tol = 1e-12 * q.singular_values.max();
    let u = q.u.expect("requested");
    let cols: Vec<usize> = (0..q.singular_values.len()).filter(|&i| q.singular_values[i] > tol).collect();
    let basis = submatrix(&u, &(0..n).collect::<Vec<_>>(), &cols);
    let e = DMatrix::identity(n, n) - &basis * basis.transpose();
    let linv_t = chol.l().transpose().try_inverse().expect("invertible");
    let x = e * linv_t;
    Ok(a.norm_2() * largest_sym_eig(&(x.transpose() * x)))
}

pub fn sap_constant(a: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky_spd(a)?;
    check_p(a, p)?;
    let n = a.nrows();
    let pt = p.transpose();
    let ac = &pt * a * p;
    let tol = 1e-12 * ac.amax();
    let proj = p * ac.pseudo_inverse(tol).map_err(|e| AmgError::Singular(e.into()))? * &pt * a;
    let x = (DMatrix::identity(n, n) - proj) * chol.inverse();
    Ok(a.norm_2() * largest_sym_eig(&(x.transpose() * a * x)))
}

trait Norm2 {
    fn norm_2(&self) -> f64;
}

impl Norm2 for DMatrix<f64> {
    fn norm_2(&self) -> f64 {
        self.clone().singular_values().max()
    }
}

/// `|| P (R A P)^{-1} R A ||` in the `sqrt(A^T A)` norm.
pub fn stability_constant(a: &DMatrix<f64>, p: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
    let n = check_square_dense(a)?;
    check_p(a, p)?;
    if r.ncols() != n || r.nrows() != p.ncols() {
        return invalid("R must be n_c x n");
    }
    let rap = r * a * p;
    let inv = rap
        .clone()
        .try_inverse()
        .ok_or_else(|| AmgError::Singular("R A P is singular".into()))?;
    let t = p * inv * r * a;
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let s = &svd.singular_values;
    let h_half = v_t.transpose() * DMatrix::from_diagonal(&s.map(|x| x.sqrt())) * &v_t;
    let h_mhalf = v_t.transpose() * DMatrix::from_diagonal(&s.map(|x| 1.0 / x.sqrt())) * &v_t;
    Ok((h_half * t * h_mhalf).singular_values().max())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub rho_bar: f64,
    pub a: f64,
    /// `||y - fit|| / ||y||` with `y = -log(rho)`.
    pub relative_residual: f64,
}

/// Least-squares fit of `-log(rho) = -log(rho_bar) + a h^q`.
pub fn asymptotic_fit(h: &[f64], rho: &[f64], q: i32) -> Result<AsymptoticFit> {
    if h.len() != rho.len() {
        return invalid("h and rho must have the same length");
    }
    if h.len() < 3 {
        return invalid("asymptotic fit needs at least three samples");
    }
    if h.iter().any(|&x| !(x > 0.0)) {
        return invalid("step sizes must be positive");
    }
    if rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return invalid("convergence factors must lie in (0, 1)");
    }
    let t: Vec<f64> = h.iter().map(|x| x.powi(q)).collect();
    let y: Vec<f64> = rho.iter().map(|r| -r.ln()).collect();
    let m = t.len() as f64;
    let (st, sy) = (t.iter().sum::<f64>(), y.iter().sum::<f64>());
    let stt: f64 = t.iter().map(|x| x * x).sum();
    let sty: f64 = t.iter().zip(&y).map(|(a, b)| a * b).sum();
    let den = m * stt - st * st;
    let (c0, c1) = if den.abs() <= 1e-300 {
        (sy / m, 0.0)
    } else {
        let c1 = (m * sty - st * sy) / den;
        ((sy - c1 * st) / m, c1)
    };
    let res: f64 = t.iter().zip(&y).map(|(ti, yi)| (yi - c0 - c1 * ti).powi(2)).sum::<f64>().sqrt();
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(AsymptoticFit {
        rho_bar: (-c0).exp(),
        a: c1,
        relative_residual: if ynorm > 0.0 { res / ynorm } else { 0.0 },
    })
}

/// Random symmetric positive definite matrix `M M^T + shift I`.
pub fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(n, n) * (0.1 * n as f64)
}

/// Random partition with `1 <= n_c < n` C-points.
pub fn random_partition(n: usize, rng: &mut impl Rng) -> CfPartition {
    let nc = rng.gen_range(1..n.max(2));
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.gen_range(0..=i));
    }
    let mut c = idx[..nc].to_vec();
    c.sort_unstable();
    CfPartition::from_c_points(n, c).expect("valid by construction")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed discrepancy (or measured value) for the check.
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Energy-minimization equivalence on `count` random instances.
pub fn check_energymin_equivalence(count: usize, max_n: usize, rng: &mut impl Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = rng.gen_range(4..=max_n);
        let a = random_spd(n, rng);
        let part = random_partition(n, rng);
        let pattern: Vec<Vec<usize>> = part
            .c_points
            .iter()
            .map(|_| part.f_points.iter().copied().filter(|_| rng.gen_bool(0.4)).collect())
            .collect();
        let rep = verify_energymin_equivalence(&a, &part, &pattern)?;
        worst = worst.max(rep.max_discrepancy);
    }
    Ok(CheckResult {
        name: "energy_min_equivalence".into(),
        passed: worst <= EQUIVALENCE_TOL,
        value: worst,
        tolerance: EQUIVALENCE_TOL,
    })
}

/// Numerical minimizer of `mu_hat` versus the closed form, relative max
/// difference over `count` random instances.
pub fn check_sap_argmin(count: usize, max_n: usize, rng: &mut impl Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = rng.gen_range(4..=max_n);
        let a = random_spd(n, rng);
        let part = random_partition(n, rng);
        let w_num = sap_argmin(&a, &part)?;
        let w_cf = sap_closed_form(&a, &part)?;
        let d = (&w_num - &w_cf).amax() / w_cf.amax().max(1.0);
        worst = worst.max(d);
    }
    Ok(CheckResult {
        name: "sap_ideal_closed_form".into(),
        passed: worst <= 1e-6,
        value: worst,
        tolerance: 1e-6,
    })
}

/// `K_sap(A) <= K_wap(A^2) <= K_sap(A)^2` on random instances; the value is
/// the largest relative violation.
pub fn check_wap_sap(count: usize, max_n: usize, rng: &mut impl Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = rng.gen_range(4..=max_n);
        let a = random_spd(n, rng);
        let nc = rng.gen_range(1..n);
        let p = DMatrix::from_fn(n, nc, |_, _| rng.gen_range(-1.0..1.0));
        let ks = sap_constant(&a, &p)?;
        let kw = wap_constant(&(&a * &a), &p)?;
        worst = worst.max((ks - kw) / kw).max((kw - ks * ks) / (ks * ks));
    }
    Ok(CheckResult {
        name: "wap_a2_vs_sap_bounds".into(),
        passed: worst <= 1e-8,
        value: worst,
        tolerance: 1e-8,
    })
}

/// Ideal interpolation is not improved by random perturbations of `W`
/// under `mu`.
pub fn check_ideal_optimality(count: usize, max_n: usize, rng: &mut impl Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = rng.gen_range(4..=max_n);
        let a = random_spd(n, rng);
        let part = random_partition(n, rng);
        let ideal = ideal_interpolation(&a, &part)?;
        let mu0 = wap_measure(&a, &ideal.p, &part)?;
        for _ in 0..10 {
            let scale = 10f64.powf(rng.gen_range(-4.0..0.0));
            let dw = DMatrix::from_fn(ideal.w.nrows(), ideal.w.ncols(), |_, _| scale * rng.gen_range(-1.0..1.0));
            let mu = wap_measure(&a, &assemble_p(&(&ideal.w + dw), &part), &part)?;
            worst = worst.max((mu0 - mu) / mu0);
        }
    }
    Ok(CheckResult {
        name: "ideal_interpolation_optimal".into(),
        passed: worst <= 1e-10,
        value: worst,
        tolerance: 1e-10,
    })
}

/// The dense lemma suite driven by the command-line `verify` subcommand.
pub fn run_lemma_suite(seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = vec![
        check_energymin_equivalence(50, 40, &mut rng)?,
        check_sap_argmin(20, 20, &mut rng)?,
        check_wap_sap(20, 30, &mut rng)?,
        check_ideal_optimality(10, 20, &mut rng)?,
    ];
    Ok(VerifyReport { seed, checks })
}
