//! Constrained energy minimization of interpolation columns.
//!
//! The iterate `P` lives on a fixed pattern. Each step computes the gradient
//! of `sum_j E_j(P)` on the pattern, projects it row by row onto the null
//! space of the constraint `U B_c = 0` (root rows are frozen), and takes a
//! conjugate-gradient step. The step length is capped so that no single
//! column energy increases; after a capped step the direction is restarted.

use super::{masked_product, masked_product_sparse, CandidateSet, InterpConfig, Krylov, Patterned, RowProjector};
use crate::complexity::{Bucket, WorkLedger};
use crate::error::{check_dim, invalid, Result};
use crate::sparse::{filter_rows, SparseMatrix};

#[derive(Debug, Clone)]
pub struct EnergyResult {
    pub p: SparseMatrix,
    /// Column energies before the first step and after every step.
    pub column_energies: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Steps whose length was reduced to keep every column energy monotone.
    pub capped_steps: usize,
    pub inconsistent_rows: Vec<usize>,
}

pub(crate) struct KrylovState {
    pub iterations: usize,
    pub capped_steps: usize,
    pub energies: Vec<Vec<f64>>,
}

/// Applies the energy operator (`A` for cg, `A^T A` for gmres) to `x` on the
/// pattern of `x`.
fn apply_op(
    a: &SparseMatrix,
    at: Option<&SparseMatrix>,
    x: &Patterned,
    ledger: &mut WorkLedger,
) -> Vec<f64> {
    match at {
        None => {
            let (v, f) = masked_product(a, x, &x.pat);
            ledger.charge(Bucket::P, f);
            v
        }
        Some(at) => {
            let xs = x.to_sparse();
            let flops = a.matmul_flops(&xs);
            let ax = a.matmul(&xs).expect("dimensions fixed at setup");
            let (v, f) = masked_product_sparse(at, &ax, &x.pat);
            ledger.charge(Bucket::P, flops + f);
            v
        }
    }
}

fn column_sums(pat: &SparseMatrix, x: &[f64], y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (p, &c) in pat.col_indices().iter().enumerate() {
        out[c] += x[p] * y[p];
    }
}

/// Runs `iters` constrained CG steps on `p` in place.
pub(crate) fn energy_iterate(
    a: &SparseMatrix,
    at: Option<&SparseMatrix>,
    p: &mut Patterned,
    proj: &RowProjector,
    iters: usize,
    record: bool,
    ledger: &mut WorkLedger,
) -> KrylovState {
    let nnz = p.vals.len();
    let nc = p.pat.n_cols();
    let pat = p.pat.clone();
    let offsets = pat.row_offsets();
    let cols = pat.col_indices();

    let mut g = apply_op(a, at, p, ledger);
    let mut energy = vec![0.0; nc];
    column_sums(&pat, &p.vals, &g, &mut energy);
    let mut state = KrylovState {
        iterations: 0,
        capped_steps: 0,
        energies: Vec::new(),
    };
    if record {
        state.energies.push(energy.clone());
    }

    let mut r = vec![0.0; nnz];
    let mut d = vec![0.0; nnz];
    let mut gcol = vec![0.0; nc];
    let mut hcol = vec![0.0; nc];
    let mut rr_old = 0.0;
    let mut restart = true;
    let mut rr0 = None;
    let mut dp = Patterned::zeros(&pat);

    for _ in 0..iters {
        for i in 0..pat.n_rows() {
            let (s, e) = (offsets[i], offsets[i + 1]);
            for q in s..e {
                r[q] = -g[q];
            }
            proj.project(i, &cols[s..e], &mut r[s..e]);
        }
        ledger.charge(Bucket::P, proj.pass_ops(&pat) + nnz as u64);
        let rr: f64 = r.iter().map(|x| x * x).sum();
        let rr0v = *rr0.get_or_insert(rr);
        if rr == 0.0 || rr <= 1e-28 * rr0v {
            break;
        }
        if restart {
            d.copy_from_slice(&r);
        } else {
            let beta = rr / rr_old;
            for q in 0..nnz {
                d[q] = r[q] + beta * d[q];
            }
        }
        rr_old = rr;

        dp.vals.copy_from_slice(&d);
        let w = apply_op(a, at, &dp, ledger);
        let dad: f64 = d.iter().zip(&w).map(|(x, y)| x * y).sum();
        let rd: f64 = r.iter().zip(&d).map(|(x, y)| x * y).sum();
        ledger.charge(Bucket::P, 4 * nnz as u64);
        if !(dad > 0.0) || !(rd > 0.0) {
            break;
        }
        let alpha = rd / dad;

        column_sums(&pat, &d, &g, &mut gcol);
        column_sums(&pat, &d, &w, &mut hcol);
        let mut cap = f64::INFINITY;
        for j in 0..nc {
            let (gj, hj) = (gcol[j], hcol[j]);
            let tol = 1e-13 * energy[j].abs().max(f64::MIN_POSITIVE);
            let bound = if hj > 0.0 {
                (-gj + (gj * gj + hj * tol).sqrt()) / hj
            } else if gj > 0.0 {
                tol / (2.0 * gj)
            } else {
                f64::INFINITY
            };
            cap = cap.min(bound);
        }
        let step = alpha.min(cap);
        if !(step > 0.0) {
            break;
        }
        if step < alpha {
            state.capped_steps += 1;
            restart = true;
        } else {
            restart = false;
        }
        for q in 0..nnz {
            p.vals[q] += step * d[q];
            g[q] += step * w[q];
        }
        column_sums(&pat, &p.vals, &g, &mut energy);
        ledger.charge(Bucket::P, 3 * nnz as u64);
        state.iterations += 1;
        if record {
            state.energies.push(energy.clone());
        }
        if step < 1e-12 * alpha {
            break;
        }
    }
    state
}

pub(crate) fn check_krylov(a: &SparseMatrix, krylov: Krylov) -> Result<Option<SparseMatrix>> {
    match krylov {
        Krylov::Cg => {
            if !a.is_symmetric(1e-12) || a.diagonal().iter().any(|&d| !(d > 0.0)) {
                return invalid("cg energy minimization needs a symmetric positive definite matrix");
            }
            Ok(None)
        }
        Krylov::Gmres => Ok(Some(a.transpose())),
    }
}

fn fixed_rows(n_rows: usize, roots: &[usize]) -> Result<Vec<bool>> {
    let mut fixed = vec![false; n_rows];
    for &r in roots {
        if r >= n_rows {
            return invalid(format!("root {r} out of range"));
        }
        fixed[r] = true;
    }
    Ok(fixed)
}

fn contained(inner: &SparseMatrix, outer: &SparseMatrix) -> bool {
    (0..inner.n_rows()).all(|i| {
        let oc = outer.row(i).0;
        inner.row(i).0.iter().all(|c| oc.binary_search(c).is_ok())
    })
}

/// Energy-minimizing interpolation on the pattern `n`, starting from `t`
/// (which must satisfy `T B_c = B` and lie inside `n`). Root rows stay fixed.
#[allow(clippy::too_many_arguments)]
pub fn energy_minimize(
    a: &SparseMatrix,
    t: &SparseMatrix,
    b: &CandidateSet,
    bc: &CandidateSet,
    n: &SparseMatrix,
    roots: &[usize],
    cfg: &InterpConfig,
    ledger: &mut WorkLedger,
) -> Result<EnergyResult> {
    cfg.validate()?;
    check_dim("energy_minimize", a.n_cols(), t.n_rows())?;
    check_dim("energy_minimize", t.n_rows(), n.n_rows())?;
    check_dim("energy_minimize", t.n_cols(), n.n_cols())?;
    check_dim("energy_minimize", t.n_cols(), bc.nrows())?;
    check_dim("energy_minimize", t.n_rows(), b.nrows())?;
    if !contained(t, n) {
        return invalid("pattern of T is not contained in N");
    }
    let at = check_krylov(a, cfg.krylov)?;
    let proj = RowProjector::new(n, bc, fixed_rows(n.n_rows(), roots)?, ledger);
    let mut p = Patterned::restrict(n, t);
    let st = energy_iterate(a, at.as_ref(), &mut p, &proj, cfg.iterations(), true, ledger);
    Ok(EnergyResult {
        p: p.to_sparse(),
        column_energies: st.energies,
        iterations: st.iterations,
        capped_steps: st.capped_steps,
        inconsistent_rows: Vec::new(),
    })
}

/// Filters `P` (root rows protected), re-enforces the constraints on the
/// reduced pattern and applies one energy-minimization step.
#[allow(clippy::too_many_arguments)]
pub fn postfilter_pipeline(
    p: &SparseMatrix,
    a: &SparseMatrix,
    b: &CandidateSet,
    bc: &CandidateSet,
    roots: &[usize],
    cfg: &InterpConfig,
    ledger: &mut WorkLedger,
) -> Result<EnergyResult> {
    let Some(spec) = cfg.postfilter else {
        return invalid("postfilter_pipeline called without a postfilter");
    };
    let at = check_krylov(a, cfg.krylov)?;
    let fixed = fixed_rows(p.n_rows(), roots)?;
    let mut filtered = filter_rows(p, spec.theta, spec.k, |_, _| false, |i| fixed[i])?;
    ledger.charge(Bucket::P, p.nnz() as u64);
    let mut proj = RowProjector::new(&filtered, bc, fixed.clone(), ledger);
    let mut pv = Patterned::restrict(&filtered, &filtered);
    let mut bad = super::constraints::enforce_on(&mut pv, b, &proj, ledger);
    if !bad.is_empty() {
        // rows the filter made inconsistent keep their unfiltered values
        filtered = super::pattern::restore_rows(&filtered, p, &bad)?;
        proj = RowProjector::new(&filtered, bc, fixed, ledger);
        pv = Patterned::restrict(&filtered, &filtered);
        bad = super::constraints::enforce_on(&mut pv, b, &proj, ledger);
    }
    let st = energy_iterate(a, at.as_ref(), &mut pv, &proj, 1, true, ledger);
    Ok(EnergyResult {
        p: pv.to_sparse(),
        column_energies: st.energies,
        iterations: st.iterations,
        capped_steps: st.capped_steps,
        inconsistent_rows: bad,
    })
}
