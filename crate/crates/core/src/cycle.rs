//! Multigrid cycles and the solve driver (stationary, CG or flexible GMRES).

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::hierarchy::Hierarchy;
use crate::relax::Direction;
use crate::sparse::{dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleKind {
    V,
    W,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accel {
    None,
    Cg,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub accel: Accel,
    pub nu_pre: usize,
    pub nu_post: usize,
    pub kind: CycleKind,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 100,
            accel: Accel::Cg,
            nu_pre: 1,
            nu_post: 1,
            kind: CycleKind::V,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return invalid(format!("tolerance must be positive, got {}", self.tol));
        }
        Ok(())
    }
}

/// Residual growth factor at which a solve is declared divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// `||b - A x_k||_2` for `k = 0, 1, ...` (GMRES: the Arnoldi estimate,
    /// with the last entry recomputed exactly).
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub rho: f64,
    pub chi_oc: f64,
    /// Work units of one cycle for the smoother in use.
    pub chi_cc: f64,
    /// Instrumented work units spent inside multigrid cycles.
    pub work_units_solve: f64,
    /// `work_units_solve` plus residual checks and Krylov vector work.
    pub work_units_total: f64,
}

/// Per-level scratch: residual, coarse right-hand side and correction.
struct Work {
    r: Vec<f64>,
    bc: Vec<f64>,
    xc: Vec<f64>,
    scratch: Vec<f64>,
}

fn workspace(h: &Hierarchy) -> Vec<Work> {
    let last = h.levels.len() - 1;
    (0..last)
        .map(|l| {
            let nc = h.levels[l + 1].a.n_rows();
            Work {
                r: vec![0.0; h.levels[l].a.n_rows()],
                bc: vec![0.0; nc],
                xc: vec![0.0; nc],
                scratch: Vec::new(),
            }
        })
        .collect()
}

/// Recursive cycle on level `l`; returns the multiply count (coarsest solve
/// excluded).
#[allow(clippy::too_many_arguments)]
fn cycle_rec(
    h: &Hierarchy,
    l: usize,
    x: &mut [f64],
    b: &[f64],
    nu_pre: usize,
    nu_post: usize,
    kind: CycleKind,
    ws: &mut [Work],
) -> u64 {
    let lev = &h.levels[l];
    let Some((w, rest)) = ws.split_first_mut() else {
        h.coarse.solve(b, x);
        return 0;
    };
    let a = &lev.a;
    let nnz = a.nnz() as u64;
    let sm = &h.smoothers[l];
    let (p, r) = (lev.p.as_ref().unwrap(), lev.r.as_ref().unwrap());
    let mut ops = 0;
    ops += sm.smooth(a, x, b, Direction::Forward, nu_pre, &mut w.scratch) as u64 * nnz;
    a.residual_into(x, b, &mut w.r);
    ops += nnz;
    r.spmv_into(&w.r, &mut w.bc);
    ops += r.nnz() as u64;
    w.xc.iter_mut().for_each(|v| *v = 0.0);
    let visits = match kind {
        CycleKind::V => 1,
        CycleKind::W => 2,
    };
    for _ in 0..visits {
        ops += cycle_rec(h, l + 1, &mut w.xc, &w.bc, nu_pre, nu_post, kind, rest);
    }
    // x += P xc
    for i in 0..p.n_rows() {
        let mut s = 0.0;
        for (j, v) in p.row_iter(i) {
            s += v * w.xc[j];
        }
        x[i] += s;
    }
    ops += p.nnz() as u64;
    ops += sm.smooth(a, x, b, Direction::Backward, nu_post, &mut w.scratch) as u64 * nnz;
    ops
}

/// One multigrid cycle started from `x`.
pub fn cycle(
    h: &Hierarchy,
    x: &[f64],
    b: &[f64],
    nu_pre: usize,
    nu_post: usize,
    kind: CycleKind,
) -> Result<Vec<f64>> {
    let n = h.levels[0].a.n_rows();
    check_dim("cycle x", n, x.len())?;
    check_dim("cycle b", n, b.len())?;
    let mut out = x.to_vec();
    let mut ws = workspace(h);
    cycle_rec(h, 0, &mut out, b, nu_pre, nu_post, kind, &mut ws);
    Ok(out)
}

/// Work units of one cycle for the hierarchy's smoother: the cycle
/// complexity formula with every sweep weighted by its passes over `A` and
/// level `l` of a W-cycle visited `2^l` times.
pub fn cycle_cost(h: &Hierarchy, nu_pre: usize, nu_post: usize, kind: CycleKind) -> f64 {
    let last = h.levels.len() - 1;
    let base = h.levels[0].a.nnz() as f64;
    let mut total = 0.0;
    for l in 0..last {
        let lev = &h.levels[l];
        let sm = &h.smoothers[l];
        let passes = sm.passes(sm.sweeps * nu_pre) + sm.passes(sm.sweeps * nu_post) + 1;
        let per = passes as f64 * lev.a.nnz() as f64
            + lev.p.as_ref().map_or(0, |p| p.nnz()) as f64
            + lev.r.as_ref().map_or(0, |r| r.nnz()) as f64;
        let visits = match kind {
            CycleKind::V => 1.0,
            CycleKind::W => 2f64.powi(l as i32),
        };
        total += visits * per;
    }
    total / base
}

/// Geometric mean of the last `min(5, len - 1)` residual ratios; 0 once a
/// residual reaches zero.
pub fn convergence_factor(history: &[f64]) -> Result<f64> {
    if history.len() < 2 {
        return invalid("convergence factor needs at least two residuals");
    }
    let w = (history.len() - 1).min(5);
    let tail = &history[history.len() - 1 - w..];
    if tail.contains(&0.0) {
        return Ok(0.0);
    }
    let log_sum: f64 = tail.windows(2).map(|p| (p[1] / p[0]).ln()).sum();
    Ok((log_sum / w as f64).exp())
}

/// Bookkeeping shared by the three drivers.
struct Tracker {
    history: Vec<f64>,
    target: f64,
    limit: f64,
    cycle_ops: u64,
    other_ops: u64,
}

impl Tracker {
    fn new(r0: f64, bnorm: f64, tol: f64) -> Self {
        let denom = if bnorm > 0.0 { bnorm } else { r0 };
        Self {
            history: vec![r0],
            target: tol * denom,
            limit: DIVERGENCE_FACTOR * r0,
            cycle_ops: 0,
            other_ops: 0,
        }
    }

    fn converged(&self, r: f64) -> bool {
        r <= self.target
    }

    fn diverged(&self, r: f64) -> bool {
        !r.is_finite() || r > self.limit
    }
}

/// Solves `A x = b` with multigrid cycles, optionally as a preconditioner
/// for CG (symmetric hierarchies only) or flexible GMRES with restart length
/// `max_iters`.
pub fn solve(h: &Hierarchy, b: &[f64], x0: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    opts.validate()?;
    let a = &h.levels[0].a;
    let n = a.n_rows();
    check_dim("solve b", n, b.len())?;
    check_dim("solve x0", n, x0.len())?;
    if opts.accel == Accel::Cg && !h.symmetric {
        return invalid("cg acceleration needs a symmetric hierarchy (symmetric A and R = P^T)");
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.residual_into(&x, b, &mut r);
    let mut tr = Tracker::new(norm2(&r), norm2(b), opts.tol);
    tr.other_ops += a.nnz() as u64;
    let mut ws = workspace(h);
    let (converged, diverged) = if tr.converged(tr.history[0]) {
        (true, false)
    } else {
        match opts.accel {
            Accel::None => stationary(h, &mut x, b, &mut r, opts, &mut ws, &mut tr),
            Accel::Cg => pcg(h, &mut x, &mut r, opts, &mut ws, &mut tr),
            Accel::Gmres => fgmres(h, &mut x, b, &r, opts, &mut ws, &mut tr),
        }
    };
    let base = a.nnz() as f64;
    let rho = if tr.history.len() >= 2 {
        convergence_factor(&tr.history)?
    } else {
        0.0
    };
    let report = SolveReport {
        iterations: tr.history.len() - 1,
        converged,
        diverged,
        rho,
        chi_oc: h.operator_complexity(),
        chi_cc: cycle_cost(h, opts.nu_pre, opts.nu_post, opts.kind),
        work_units_solve: tr.cycle_ops as f64 / base,
        work_units_total: (tr.cycle_ops + tr.other_ops) as f64 / base,
        residual_history: tr.history,
    };
    Ok((x, report))
}

fn stationary(
    h: &Hierarchy,
    x: &mut [f64],
    b: &[f64],
    r: &mut [f64],
    opts: &SolveOptions,
    ws: &mut [Work],
    tr: &mut Tracker,
) -> (bool, bool) {
    let a = &h.levels[0].a;
    for _ in 0..opts.max_iters {
        tr.cycle_ops += cycle_rec(h, 0, x, b, opts.nu_pre, opts.nu_post, opts.kind, ws);
        a.residual_into(x, b, r);
        tr.other_ops += a.nnz() as u64;
        let rn = norm2(r);
        tr.history.push(rn);
        if tr.converged(rn) {
            return (true, false);
        }
        if tr.diverged(rn) {
            return (false, true);
        }
    }
    (false, false)
}

/// `z = M r`, one cycle from a zero initial guess.
fn precondition(h: &Hierarchy, r: &[f64], z: &mut [f64], opts: &SolveOptions, ws: &mut [Work]) -> u64 {
    z.iter_mut().for_each(|v| *v = 0.0);
    cycle_rec(h, 0, z, r, opts.nu_pre, opts.nu_post, opts.kind, ws)
}

fn pcg(
    h: &Hierarchy,
    x: &mut [f64],
    r: &mut [f64],
    opts: &SolveOptions,
    ws: &mut [Work],
    tr: &mut Tracker,
) -> (bool, bool) {
    let a = &h.levels[0].a;
    let n = x.len();
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    tr.cycle_ops += precondition(h, r, &mut z, opts, ws);
    let mut p = z.clone();
    let mut rz = dot(r, &z);
    for _ in 0..opts.max_iters {
        a.spmv_into(&p, &mut q);
        let pq = dot(&p, &q);
        tr.other_ops += a.nnz() as u64 + 5 * n as u64;
        if pq == 0.0 || rz == 0.0 {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rn = norm2(r);
        tr.history.push(rn);
        if tr.converged(rn) {
            return (true, false);
        }
        if tr.diverged(rn) {
            return (false, true);
        }
        tr.cycle_ops += precondition(h, r, &mut z, opts, ws);
        let rz_new = dot(r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (false, false)
}

#[allow(clippy::too_many_arguments)]
fn fgmres(
    h: &Hierarchy,
    x: &mut [f64],
    b: &[f64],
    r0: &[f64],
    opts: &SolveOptions,
    ws: &mut [Work],
    tr: &mut Tracker,
) -> (bool, bool) {
    let a = &h.levels[0].a;
    let n = x.len();
    let m = opts.max_iters;
    let beta = norm2(r0);
    let mut v: Vec<Vec<f64>> = vec![r0.iter().map(|t| t / beta).collect()];
    let mut zs: Vec<Vec<f64>> = Vec::new();
    // Hessenberg columns after rotation, Givens pairs, rotated rhs
    let mut hcols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    let mut status = (false, false);
    let mut w = vec![0.0; n];
    for j in 0..m {
        let mut z = vec![0.0; n];
        tr.cycle_ops += precondition(h, &v[j], &mut z, opts, ws);
        a.spmv_into(&z, &mut w);
        tr.other_ops += a.nnz() as u64;
        let mut hc = vec![0.0; j + 2];
        for (i, vi) in v.iter().enumerate() {
            let d = dot(&w, vi);
            hc[i] = d;
            w.iter_mut().zip(vi).for_each(|(a, b)| *a -= d * b);
        }
        let hn = norm2(&w);
        hc[j + 1] = hn;
        tr.other_ops += 2 * (j as u64 + 1) * n as u64;
        for (i, &(c, s)) in cs.iter().enumerate() {
            let (a0, a1) = (hc[i], hc[i + 1]);
            hc[i] = c * a0 + s * a1;
            hc[i + 1] = -s * a0 + c * a1;
        }
        let (a0, a1) = (hc[j], hc[j + 1]);
        let den = a0.hypot(a1);
        let (c, s) = if den == 0.0 { (1.0, 0.0) } else { (a0 / den, a1 / den) };
        hc[j] = den;
        hc[j + 1] = 0.0;
        cs.push((c, s));
        g.push(-s * g[j]);
        g[j] *= c;
        hcols.push(hc);
        zs.push(z);
        let est = g[j + 1].abs();
        tr.history.push(est);
        if tr.converged(est) {
            status = (true, false);
            break;
        }
        if tr.diverged(est) {
            status = (false, true);
            break;
        }
        if hn == 0.0 {
            break;
        }
        v.push(w.iter().map(|t| t / hn).collect());
    }
    // back substitution
    let k = hcols.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for jj in i + 1..k {
            s -= hcols[jj][i] * y[jj];
        }
        y[i] = if hcols[i][i] != 0.0 { s / hcols[i][i] } else { 0.0 };
    }
    for (yi, z) in y.iter().zip(&zs) {
        x.iter_mut().zip(z).for_each(|(a, b)| *a += yi * b);
    }
    // replace the final estimate by the true residual
    let mut r = vec![0.0; n];
    a.residual_into(x, b, &mut r);
    tr.other_ops += a.nnz() as u64;
    let rn = norm2(&r);
    if let Some(last) = tr.history.last_mut() {
        *last = rn;
    }
    if status.0 && !tr.converged(rn) {
        status.0 = false;
    }
    if !status.0 && !status.1 && tr.converged(rn) {
        status.0 = true;
    }
    status
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_examples() {
        assert!((convergence_factor(&[1.0, 0.5, 0.25]).unwrap() - 0.5).abs() < 1e-15);
        assert!((convergence_factor(&[1.0, 0.1]).unwrap() - 0.1).abs() < 1e-15);
        assert!((convergence_factor(&[1.0, 0.4, 0.36]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(convergence_factor(&[1.0, 0.0]).unwrap(), 0.0);
        assert!(convergence_factor(&[1.0]).is_err());
    }

    #[test]
    fn factor_uses_last_five_ratios() {
        let h = [1.0, 1e-3, 0.5e-3, 0.25e-3, 0.125e-3, 0.0625e-3, 0.03125e-3];
        assert!((convergence_factor(&h).unwrap() - 0.5).abs() < 1e-14);
    }
}
