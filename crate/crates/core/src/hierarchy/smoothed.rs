use nalgebra::DMatrix;

use super::rootnode::aggregate_level;
use super::{check_candidates, Hierarchy, Level, Method, SetupDiagnostics, SetupOptions, SYMMETRY_TOL};
use crate::aggregation::Aggregation;
use crate::complexity::{Bucket, WorkLedger};
use crate::error::{check_dim, invalid, Result};
use crate::interpolation::{
    check_krylov, energy_iterate, sparsity_pattern_counted, CandidateSet, Patterned, RowProjector,
};
use crate::sparse::{galerkin_product_counted, SparseMatrix};
use crate::spectral::{dinv_a_radius, inverse_diagonal};

/// Relative threshold below which an orthogonalized candidate is treated as
/// linearly dependent on the previous ones.
const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SaTentative {
    /// Block-diagonal tentative interpolation with orthonormal blocks.
    pub t: SparseMatrix,
    /// `T^T B`.
    pub bc: CandidateSet,
    /// Number of coarse columns kept for every aggregate.
    pub widths: Vec<usize>,
    /// Candidate columns dropped as locally dependent, summed over aggregates.
    pub dropped: usize,
}

/// Smoothed-aggregation tentative interpolation: on every aggregate the rows
/// of `B` belonging to it (DOFs `m i .. m i + m - 1` of every member node `i`)
/// are orthonormalized by modified Gram-Schmidt; dependent columns are
/// dropped locally.
pub fn tentative_sa(agg: &Aggregation, b: &CandidateSet, m: usize) -> Result<SaTentative> {
    if m == 0 {
        return invalid("block size must be positive");
    }
    let n_nodes = agg.pattern.n_rows();
    check_dim("tentative_sa", n_nodes * m, b.nrows())?;
    let k = b.ncols();
    let membership = agg.membership();
    let mut members = vec![Vec::new(); agg.n_aggregates()];
    for (i, &a) in membership.iter().enumerate() {
        members[a].push(i);
    }

    // per-aggregate orthonormal block, stored column-major over the member DOFs
    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(members.len());
    let mut widths = Vec::with_capacity(members.len());
    let mut dropped = 0;
    for mem in &members {
        let dofs: Vec<usize> = mem.iter().flat_map(|&i| (0..m).map(move |c| i * m + c)).collect();
        let local = DMatrix::from_fn(dofs.len(), k, |r, l| b[(dofs[r], l)]);
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
        for l in 0..k {
            let mut v: Vec<f64> = local.column(l).iter().copied().collect();
            let orig = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            // two passes of MGS for stability
            for _ in 0..2 {
                for u in &q {
                    let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
                }
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if orig == 0.0 || nrm <= DEPENDENCE_TOL * orig {
                dropped += 1;
                continue;
            }
            v.iter_mut().for_each(|x| *x /= nrm);
            q.push(v);
        }
        widths.push(q.len());
        blocks.push(DMatrix::from_fn(dofs.len(), q.len(), |r, c| q[c][r]));
    }

    let mut col_start = Vec::with_capacity(widths.len() + 1);
    col_start.push(0);
    for w in &widths {
        col_start.push(col_start.last().unwrap() + w);
    }
    let n_coarse = *col_start.last().unwrap();
    let mut pos = vec![0usize; n_nodes];
    for mem in &members {
        for (p, &i) in mem.iter().enumerate() {
            pos[i] = p;
        }
    }
    let mut trip = Vec::new();
    for i in 0..n_nodes * m {
        let a = membership[i / m];
        let r = pos[i / m] * m + i % m;
        for c in 0..widths[a] {
            trip.push((i, col_start[a] + c, blocks[a][(r, c)]));
        }
    }
    let t = SparseMatrix::from_triplets(n_nodes * m, n_coarse, &trip)?;
    let mut bc = DMatrix::zeros(n_coarse, k);
    for i in 0..t.n_rows() {
        for (c, v) in t.row_iter(i) {
            for l in 0..k {
                bc[(c, l)] += v * b[(i, l)];
            }
        }
    }
    Ok(SaTentative {
        t,
        bc,
        widths,
        dropped,
    })
}

/// `(I - omega D^{-1} A)^s T` with `omega = 4 / (3 rho(D^{-1}A))`.
fn smooth_prolongator(
    a: &SparseMatrix,
    t: &SparseMatrix,
    steps: usize,
    ledger: &mut WorkLedger,
) -> Result<SparseMatrix> {
    if steps == 0 {
        return Ok(t.clone());
    }
    let (rho, ops) = dinv_a_radius(a)?;
    ledger.charge(Bucket::P, ops);
    let omega = 4.0 / (3.0 * rho);
    let dinv = inverse_diagonal(a)?;
    let s = SparseMatrix::identity(a.n_rows())
        .add_scaled(1.0, &a.map_values(|i, _, v| dinv[i] * v), -omega)?;
    let mut p = t.clone();
    for _ in 0..steps {
        ledger.charge(Bucket::P, s.matmul_flops(&p));
        p = s.matmul(&p)?;
    }
    Ok(p)
}

/// Energy-minimized SA prolongator for non-symmetric operators: the pattern
/// `N = S^d C` (expanded to the coarse columns of each aggregate), no fixed
/// rows, started from `T` and driven by the gmres variant.
#[allow(clippy::too_many_arguments)]
fn energy_prolongator(
    a: &SparseMatrix,
    s: &SparseMatrix,
    agg: &Aggregation,
    tent: &SaTentative,
    m: usize,
    opts: &SetupOptions,
    ledger: &mut WorkLedger,
    diag: &mut SetupDiagnostics,
) -> Result<SparseMatrix> {
    let at = check_krylov(a, opts.interp.krylov)?;
    let (nodal, flops) = sparsity_pattern_counted(s, &agg.pattern, opts.interp.degree)?;
    ledger.charge(Bucket::P, flops);
    let mut col_start = vec![0];
    for w in &tent.widths {
        col_start.push(col_start.last().unwrap() + w);
    }
    let mut trip = Vec::new();
    for i in 0..nodal.n_rows() * m {
        for (ag, _) in nodal.row_iter(i / m) {
            for c in col_start[ag]..col_start[ag + 1] {
                trip.push((i, c, 1.0));
            }
        }
    }
    let pat = SparseMatrix::from_triplets(tent.t.n_rows(), tent.t.n_cols(), &trip)?;
    let proj = RowProjector::new(&pat, &tent.bc, vec![false; pat.n_rows()], ledger);
    let mut p = Patterned::restrict(&pat, &tent.t);
    let st = energy_iterate(a, at.as_ref(), &mut p, &proj, opts.interp.iterations(), false, ledger);
    diag.capped_energy_steps += st.capped_steps;
    Ok(p.to_sparse())
}

/// Smoothed-aggregation setup. Symmetric levels use `P = (I - omega D^{-1}A)^s T`
/// and `R = P^T`; non-symmetric levels build `P` and `R^T` by energy
/// minimization from the tentative operators of `B` and `B_hat`.
pub fn sa_setup(
    a: &SparseMatrix,
    b: &CandidateSet,
    b_hat: Option<&CandidateSet>,
    opts: &SetupOptions,
) -> Result<Hierarchy> {
    opts.validate()?;
    if !a.is_square() {
        return invalid("setup needs a square matrix");
    }
    check_candidates(a, b, "sa_setup")?;
    if let Some(bh) = b_hat {
        check_candidates(a, bh, "sa_setup b_hat")?;
        check_dim("sa_setup b_hat columns", b.ncols(), bh.ncols())?;
    }
    let mut m = if opts.vector_flag { a.block_size() } else { 1 };
    let block0 = m;
    let mut ledger = WorkLedger::new(a.nnz());
    let mut diag = SetupDiagnostics::default();
    let mut levels = Vec::new();
    let mut stagnated = false;
    let mut a_l = a.clone();
    let mut b_l = b.clone();
    let mut bh_l = b_hat.cloned().unwrap_or_else(|| b.clone());

    while a_l.n_rows() > opts.max_size && levels.len() + 1 < opts.max_levels {
        let symmetric = a_l.is_symmetric(SYMMETRY_TOL);
        let (s, agg) = aggregate_level(&a_l, m, opts, &mut ledger)?;
        let tent = tentative_sa(&agg, &b_l, m)?;
        ledger.charge(Bucket::P, tent.t.nnz() as u64 * b_l.ncols() as u64);
        ledger.charge(Bucket::Candidates, tent.t.nnz() as u64 * b_l.ncols() as u64);
        diag.dropped_candidate_columns += tent.dropped;

        let (p, r, bh_c) = if symmetric {
            let p = smooth_prolongator(&a_l, &tent.t, opts.sa_smoothing_steps, &mut ledger)?;
            let r = p.transpose();
            (p, r, None)
        } else {
            let that = tentative_sa(&agg, &bh_l, m)?;
            if that.widths != tent.widths {
                return invalid("b_hat spans different local dimensions than b on some aggregate");
            }
            ledger.charge(Bucket::Candidates, that.t.nnz() as u64 * bh_l.ncols() as u64);
            let p = energy_prolongator(&a_l, &s, &agg, &tent, m, opts, &mut ledger, &mut diag)?;
            let at = a_l.transpose();
            let rt = energy_prolongator(&at, &s, &agg, &that, m, opts, &mut ledger, &mut diag)?;
            (p, rt.transpose(), Some(that.bc))
        };
        let (ac, flops) = galerkin_product_counted(&r, &a_l, &p)?;
        ledger.charge(Bucket::Rap, flops);
        if ac.n_rows() >= a_l.n_rows() {
            stagnated = true;
            break;
        }
        // the coarse block size is uniform only when no aggregate lost a column
        let k = b_l.ncols();
        let next_m = if opts.vector_flag && tent.widths.iter().all(|&w| w == k) { k } else { 1 };
        let ac = ac.with_block_size(next_m)?;
        let next_b = tent.bc.clone();
        levels.push(Level {
            a: std::mem::replace(&mut a_l, ac),
            p: Some(p),
            r: Some(r),
            candidates: Some(b_l),
            coarse_candidates: Some(tent.bc),
            c_points: None,
        });
        b_l = next_b;
        bh_l = bh_c.unwrap_or_else(|| b_l.clone());
        m = next_m;
    }
    levels.push(Level {
        a: a_l,
        p: None,
        r: None,
        candidates: None,
        coarse_candidates: None,
        c_points: None,
    });
    let mut h = Hierarchy::from_levels(levels, ledger, Method::Sa, opts.relax)?;
    h.stagnated = stagnated;
    h.block_size = block0;
    h.diagnostics = diag;
    Ok(h)
}
