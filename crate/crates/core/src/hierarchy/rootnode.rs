use super::{check_candidates, Hierarchy, Level, Method, SetupDiagnostics, SetupOptions, SYMMETRY_TOL};
use crate::aggregation::{greedy_aggregate, unamalgamate, Aggregation};
use crate::complexity::{Bucket, WorkLedger};
use crate::error::{invalid, Result};
use crate::interpolation::{
    check_krylov, energy_iterate, improve_candidates, inject_on_pattern, postfilter_pipeline,
    prefilter, root_node_pattern, CandidateSet, InterpConfig,
};
use crate::interpolation::sparsity_pattern_counted;
use crate::sparse::{galerkin_product_counted, SparseMatrix};
use crate::strength::{amalgamate, normalize_strength, strength_of_connection};

/// Strength, amalgamation, normalization and aggregation for one level.
pub(crate) fn aggregate_level(
    a: &SparseMatrix,
    m: usize,
    opts: &SetupOptions,
    ledger: &mut WorkLedger,
) -> Result<(SparseMatrix, Aggregation)> {
    let s = strength_of_connection(a, &opts.strength, ledger)?;
    let s = if m > 1 {
        ledger.charge(Bucket::Aggregation, s.nnz() as u64);
        amalgamate(&s, m)?
    } else {
        s
    };
    let s = normalize_strength(&s)?;
    ledger.charge(Bucket::Aggregation, s.nnz() as u64);
    let agg = greedy_aggregate(&s)?;
    ledger.charge(Bucket::Aggregation, s.nnz() as u64);
    Ok((s, agg))
}

/// Output of the interpolation construction on one level.
pub(crate) struct Interp {
    pub p: SparseMatrix,
    pub b: CandidateSet,
    pub bc: CandidateSet,
}

/// Candidate improvement, tentative injection, energy minimization and
/// optional post-filtering on the fixed pattern `n`. Rows of a pre-filtered
/// pattern that can no longer satisfy `P B_c = B` fall back to the
/// `unfiltered` pattern.
#[allow(clippy::too_many_arguments)]
pub(crate) fn build_interpolation(
    a: &SparseMatrix,
    agg: &Aggregation,
    n: &SparseMatrix,
    unfiltered: Option<&SparseMatrix>,
    roots: &[usize],
    b: &CandidateSet,
    m: usize,
    opts: &SetupOptions,
    cfg: &InterpConfig,
    ledger: &mut WorkLedger,
    diag: &mut SetupDiagnostics,
) -> Result<Interp> {
    let at = check_krylov(a, cfg.krylov)?;
    let b = improve_candidates(a, b, opts.candidate_sweeps, ledger)?;
    let mut inj = inject_on_pattern(agg, n, &b, m, ledger)?;
    if let (Some(full), false) = (unfiltered, inj.inconsistent.is_empty()) {
        diag.restored_rows += inj.inconsistent.len();
        let n = crate::interpolation::restore_rows(n, full, &inj.inconsistent)?;
        inj = inject_on_pattern(agg, &n, &b, m, ledger)?;
    }
    diag.degenerate_aggregates += inj.degenerate.len();
    diag.inconsistent_rows += inj.inconsistent.len();
    let st = energy_iterate(a, at.as_ref(), &mut inj.t, &inj.proj, cfg.iterations(), false, ledger);
    diag.capped_energy_steps += st.capped_steps;
    let mut p = inj.t.to_sparse();
    if cfg.postfilter.is_some() {
        let res = postfilter_pipeline(&p, a, &b, &inj.bc, roots, cfg, ledger)?;
        diag.inconsistent_rows += res.inconsistent_rows.len();
        diag.capped_energy_steps += res.capped_steps;
        p = res.p;
    }
    Ok(Interp { p, b, bc: inj.bc })
}

/// Root-node setup. For non-symmetric `A` the restriction is built by the
/// same construction applied to `A^T` with the candidates `b_hat`
/// (defaulting to `b`) on the pattern derived from the strength of `A`.
pub fn rn_setup(
    a: &SparseMatrix,
    b: &CandidateSet,
    b_hat: Option<&CandidateSet>,
    opts: &SetupOptions,
) -> Result<Hierarchy> {
    opts.validate()?;
    if !a.is_square() {
        return invalid("setup needs a square matrix");
    }
    check_candidates(a, b, "rn_setup")?;
    if let Some(bh) = b_hat {
        check_candidates(a, bh, "rn_setup b_hat")?;
    }
    let m = if opts.vector_flag { a.block_size() } else { 1 };
    if b.ncols() < m {
        return invalid(format!("{} candidates cannot span block size {m}", b.ncols()));
    }
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
        let (nodal, flops) = sparsity_pattern_counted(&s, &agg.pattern, opts.interp.degree)?;
        ledger.charge(Bucket::P, flops);
        let (full, roots) = unamalgamate(&nodal, &agg.roots, m)?;
        let full = root_node_pattern(&full, &roots)?;
        let nmat = match &opts.interp.prefilter {
            Some(f) => {
                ledger.charge(Bucket::P, nodal.nnz() as u64);
                let (nmat, _) = unamalgamate(&prefilter(&nodal, f)?, &agg.roots, m)?;
                root_node_pattern(&nmat, &roots)?
            }
            None => full.clone(),
        };
        let unfiltered = opts.interp.prefilter.is_some().then_some(&full);

        let fine = build_interpolation(
            &a_l, &agg, &nmat, unfiltered, &roots, &b_l, m, opts, &opts.interp, &mut ledger, &mut diag,
        )?;
        let (r, bh_c) = if symmetric {
            (fine.p.transpose(), None)
        } else {
            let at = a_l.transpose();
            let adj = build_interpolation(
                &at, &agg, &nmat, unfiltered, &roots, &bh_l, m, opts, &opts.interp, &mut ledger, &mut diag,
            )?;
            (adj.p.transpose(), Some(adj.bc))
        };
        let (ac, flops) = galerkin_product_counted(&r, &a_l, &fine.p)?;
        ledger.charge(Bucket::Rap, flops);

        if ac.n_rows() >= a_l.n_rows() {
            stagnated = true;
            break;
        }
        let ac = if m > 1 { ac.with_block_size(m)? } else { ac };
        let next_b = fine.bc.clone();
        levels.push(Level {
            a: std::mem::replace(&mut a_l, ac),
            p: Some(fine.p),
            r: Some(r),
            candidates: Some(fine.b),
            coarse_candidates: Some(fine.bc),
            c_points: Some(roots),
        });
        b_l = next_b;
        if let Some(bh) = bh_c {
            bh_l = bh;
        } else {
            bh_l = b_l.clone();
        }
    }
    levels.push(Level {
        a: a_l,
        p: None,
        r: None,
        candidates: None,
        coarse_candidates: None,
        c_points: None,
    });
    let mut h = Hierarchy::from_levels(levels, ledger, Method::Rn, opts.relax)?;
    h.stagnated = stagnated;
    h.block_size = m;
    h.diagnostics = diag;
    Ok(h)
}
