//! Tentative injection and the row-wise constraint projection `P B_c = B`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{CandidateSet, Patterned};
use crate::aggregation::Aggregation;
use crate::complexity::{Bucket, WorkLedger};
use crate::error::{check_dim, invalid, Result};
use crate::sparse::SparseMatrix;

/// Relative eigenvalue cutoff for the small pseudo-inverses.
const PINV_TOL: f64 = 1e-10;

/// Pseudo-inverse of a small symmetric positive semidefinite matrix,
/// row-major.
fn spd_pinv(g: &[f64], k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![if g[0] > 0.0 { 1.0 / g[0] } else { 0.0 }];
    }
    let m = DMatrix::from_row_slice(k, k, g);
    let eig = SymmetricEigen::new(m);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut out = vec![0.0; k * k];
    if lmax <= 0.0 {
        return out;
    }
    for (l, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > PINV_TOL * lmax {
            let v = eig.eigenvectors.column(l);
            for r in 0..k {
                for c in 0..k {
                    out[r * k + c] += v[r] * v[c] / lam;
                }
            }
        }
    }
    out
}

/// Per-row data for the constraint `u B_c = r` restricted to the columns of
/// a fixed pattern: the pseudo-inverse of `M^T M` where `M` holds the rows of
/// `B_c` selected by the pattern row.
#[derive(Debug, Clone)]
pub(crate) struct RowProjector {
    k: usize,
    /// `B_c` in row-major order.
    bc: Vec<f64>,
    ginv: Vec<f64>,
    fixed: Vec<bool>,
}

impl RowProjector {
    pub fn new(pat: &SparseMatrix, bc: &CandidateSet, fixed: Vec<bool>, ledger: &mut WorkLedger) -> Self {
        let k = bc.ncols();
        let nc = bc.nrows();
        let mut bc_rm = vec![0.0; nc * k];
        for r in 0..nc {
            for l in 0..k {
                bc_rm[r * k + l] = bc[(r, l)];
            }
        }
        let mut ginv = vec![0.0; pat.n_rows() * k * k];
        let mut g = vec![0.0; k * k];
        let mut ops = 0u64;
        for i in 0..pat.n_rows() {
            if fixed[i] {
                continue;
            }
            g.iter_mut().for_each(|x| *x = 0.0);
            let (cols, _) = pat.row(i);
            for &c in cols {
                let row = &bc_rm[c * k..(c + 1) * k];
                for r in 0..k {
                    for s in 0..k {
                        g[r * k + s] += row[r] * row[s];
                    }
                }
            }
            ops += (k * k * cols.len()) as u64;
            ginv[i * k * k..(i + 1) * k * k].copy_from_slice(&spd_pinv(&g, k));
        }
        ledger.charge(Bucket::P, ops);
        Self {
            k,
            bc: bc_rm,
            ginv,
            fixed,
        }
    }

    /// Multiply count of one pass of [`Self::project`] over a pattern.
    pub fn pass_ops(&self, pat: &SparseMatrix) -> u64 {
        (self.k * self.k * pat.nnz()) as u64
    }

    /// Projects `g` (values of row `i` on columns `cols`) onto the null space
    /// of the row constraint; fixed rows are zeroed.
    pub fn project(&self, i: usize, cols: &[usize], g: &mut [f64]) {
        if self.fixed[i] {
            g.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let k = self.k;
        let mut t = [0.0f64; 8];
        let mut tv;
        let t: &mut [f64] = if k <= 8 {
            &mut t[..k]
        } else {
            tv = vec![0.0; k];
            &mut tv
        };
        for (p, &c) in cols.iter().enumerate() {
            let row = &self.bc[c * k..(c + 1) * k];
            for l in 0..k {
                t[l] += g[p] * row[l];
            }
        }
        let s = self.apply_ginv(i, t);
        for (p, &c) in cols.iter().enumerate() {
            let row = &self.bc[c * k..(c + 1) * k];
            g[p] -= (0..k).map(|l| row[l] * s[l]).sum::<f64>();
        }
    }

    fn apply_ginv(&self, i: usize, t: &[f64]) -> Vec<f64> {
        let k = self.k;
        let gi = &self.ginv[i * k * k..(i + 1) * k * k];
        (0..k)
            .map(|r| (0..k).map(|c| gi[r * k + c] * t[c]).sum())
            .collect()
    }

    /// Minimal-norm correction of row `i` so that `P_i B_c = b_i`. Returns
    /// the remaining residual (nonzero for inconsistent rows).
    pub fn correct_row(&self, i: usize, cols: &[usize], vals: &mut [f64], target: &[f64]) -> f64 {
        let k = self.k;
        let mut r = target.to_vec();
        for (p, &c) in cols.iter().enumerate() {
            let row = &self.bc[c * k..(c + 1) * k];
            for l in 0..k {
                r[l] -= vals[p] * row[l];
            }
        }
        if self.fixed[i] {
            return r.iter().fold(0.0, |m, x| m.max(x.abs()));
        }
        let s = self.apply_ginv(i, &r);
        for (p, &c) in cols.iter().enumerate() {
            let row = &self.bc[c * k..(c + 1) * k];
            let u: f64 = (0..k).map(|l| row[l] * s[l]).sum();
            vals[p] += u;
            for l in 0..k {
                r[l] -= u * row[l];
            }
        }
        r.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Applies the row-wise minimal-norm update to every non-fixed row. Returns
/// the rows whose constraint could only be met in the least-squares sense.
pub(crate) fn enforce_on(
    p: &mut Patterned,
    b: &CandidateSet,
    proj: &RowProjector,
    ledger: &mut WorkLedger,
) -> Vec<usize> {
    let k = b.ncols();
    let scale = b.amax().max(f64::MIN_POSITIVE);
    let mut bad = Vec::new();
    let mut target = vec![0.0; k];
    for i in 0..p.pat.n_rows() {
        for l in 0..k {
            target[l] = b[(i, l)];
        }
        let range = p.range(i);
        let cols = &p.pat.col_indices()[range.clone()];
        let res = proj.correct_row(i, cols, &mut p.vals[range], &target);
        if res > 1e-10 * scale {
            bad.push(i);
        }
    }
    ledger.charge(Bucket::P, proj.pass_ops(&p.pat));
    bad
}

/// Minimal-norm row updates within the existing sparsity of `P` such that
/// `P B_c = B`. Rows whose restricted system is inconsistent receive the
/// least-squares update and are listed in the second return value.
pub fn enforce_constraints(
    p: &SparseMatrix,
    b: &CandidateSet,
    bc: &CandidateSet,
) -> Result<(SparseMatrix, Vec<usize>)> {
    check_dim("enforce_constraints", p.n_rows(), b.nrows())?;
    check_dim("enforce_constraints", p.n_cols(), bc.nrows())?;
    check_dim("enforce_constraints", b.ncols(), bc.ncols())?;
    let mut ledger = WorkLedger::new(1);
    let proj = RowProjector::new(p, bc, vec![false; p.n_rows()], &mut ledger);
    let mut pv = Patterned::restrict(p, p);
    let bad = enforce_on(&mut pv, b, &proj, &mut ledger);
    Ok((pv.to_sparse(), bad))
}

/// `max |P B_c - B|`.
pub fn constraint_residual(p: &SparseMatrix, b: &CandidateSet, bc: &CandidateSet) -> Result<f64> {
    check_dim("constraint_residual", p.n_cols(), bc.nrows())?;
    check_dim("constraint_residual", p.n_rows(), b.nrows())?;
    let mut worst = 0.0f64;
    for l in 0..b.ncols() {
        let col: Vec<f64> = bc.column(l).iter().copied().collect();
        let pb = p.spmv(&col)?;
        for i in 0..b.nrows() {
            worst = worst.max((pb[i] - b[(i, l)]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct Tentative {
    pub t: SparseMatrix,
    pub bc: CandidateSet,
    /// Aggregates whose root block of candidate values was (nearly) singular.
    pub degenerate_aggregates: Vec<usize>,
    /// Rows where the constraint could not be met exactly.
    pub inconsistent_rows: Vec<usize>,
}

/// Root-node tentative interpolation on the pattern `n` (which must already
/// carry identity rows at the DOF roots). The first `m` candidates are
/// injected aggregate by aggregate and scaled so that the root block is the
/// identity; any further candidates are then fitted by the constraint
/// projection.
pub fn inject_tentative(
    agg: &Aggregation,
    n: &SparseMatrix,
    b: &CandidateSet,
    m: usize,
) -> Result<Tentative> {
    let mut ledger = WorkLedger::new(1);
    let inj = inject_on_pattern(agg, n, b, m, &mut ledger)?;
    Ok(Tentative {
        t: inj.t.to_sparse(),
        bc: inj.bc,
        degenerate_aggregates: inj.degenerate,
        inconsistent_rows: inj.inconsistent,
    })
}

pub(crate) struct Injected {
    pub t: Patterned,
    pub bc: CandidateSet,
    pub degenerate: Vec<usize>,
    pub inconsistent: Vec<usize>,
    pub proj: RowProjector,
}

pub(crate) fn inject_on_pattern(
    agg: &Aggregation,
    n: &SparseMatrix,
    b: &CandidateSet,
    m: usize,
    ledger: &mut WorkLedger,
) -> Result<Injected> {
    let n_nodes = agg.pattern.n_rows();
    let n_agg = agg.n_aggregates();
    check_dim("inject_tentative", n_nodes * m, n.n_rows())?;
    check_dim("inject_tentative", n_agg * m, n.n_cols())?;
    check_dim("inject_tentative", n.n_rows(), b.nrows())?;
    let k = b.ncols();
    if k < m {
        return invalid(format!("{k} candidates cannot span block size {m}"));
    }
    let membership = agg.membership();

    // scaled injection: rows of B (first m columns) times the inverse root block
    let mut degenerate = Vec::new();
    let mut root_inv = Vec::with_capacity(n_agg);
    for (a, &r) in agg.roots.iter().enumerate() {
        let block = DMatrix::from_fn(m, m, |i, j| b[(r * m + i, j)]);
        let amax = block.amax();
        let svd = block.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if amax == 0.0 || smin <= PINV_TOL * amax || smin <= PINV_TOL * smax {
            degenerate.push(a);
        }
        let inv = svd
            .pseudo_inverse(PINV_TOL * amax.max(f64::MIN_POSITIVE))
            .unwrap_or_else(|_| DMatrix::zeros(m, m));
        root_inv.push(inv);
    }

    let mut t = Patterned::zeros(n);
    let mut is_root = vec![false; n.n_rows()];
    for &r in &agg.roots {
        for c in 0..m {
            is_root[r * m + c] = true;
        }
    }
    for i in 0..n.n_rows() {
        let a = membership[i / m];
        let range = t.range(i);
        let cols = &n.col_indices()[range.clone()];
        for (p, &c) in cols.iter().enumerate() {
            if c / m != a {
                continue;
            }
            let cc = c % m;
            let v = if is_root[i] {
                if i % m == cc { 1.0 } else { 0.0 }
            } else {
                (0..m).map(|l| b[(i, l)] * root_inv[a][(l, cc)]).sum()
            };
            t.vals[range.start + p] = v;
        }
    }
    ledger.charge(Bucket::P, (n.nnz() * m) as u64);

    let bc = DMatrix::from_fn(n_agg * m, k, |row, l| {
        let (a, c) = (row / m, row % m);
        b[(agg.roots[a] * m + c, l)]
    });
    ledger.charge(Bucket::Candidates, (n_agg * m * k) as u64);

    let proj = RowProjector::new(n, &bc, is_root, ledger);
    let inconsistent = enforce_on(&mut t, b, &proj, ledger);
    Ok(Injected {
        t,
        bc,
        degenerate,
        inconsistent,
        proj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::greedy_aggregate;
    use crate::interpolation::root_node_pattern;

    fn path(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.0));
            if i + 1 < n {
                t.push((i, i + 1, 1.0));
                t.push((i + 1, i, 1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn minimal_norm_example() {
        // zero row with allowed columns {0, 1}, B_c rows (1; 1), target 1
        let p = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let zero_row = Patterned::zeros(&p);
        let mut l = WorkLedger::new(1);
        let bc = CandidateSet::from_element(2, 1, 1.0);
        let proj = RowProjector::new(&p, &bc, vec![false], &mut l);
        let mut z = zero_row.clone();
        let bad = enforce_on(&mut z, &CandidateSet::from_element(1, 1, 1.0), &proj, &mut l);
        assert!(bad.is_empty());
        assert_eq!(z.vals, vec![0.5, 0.5]);
    }

    #[test]
    fn satisfied_constraints_unchanged() {
        let p = SparseMatrix::from_triplets(2, 2, &[(0, 0, 0.25), (0, 1, 0.75), (1, 1, 1.0)]).unwrap();
        let bc = CandidateSet::from_element(2, 1, 1.0);
        let b = CandidateSet::from_element(2, 1, 1.0);
        let (q, bad) = enforce_constraints(&p, &b, &bc).unwrap();
        assert_eq!(q, p);
        assert!(bad.is_empty());
    }

    #[test]
    fn inconsistent_row_flagged() {
        // a single allowed column with B_c = 0 cannot reproduce B = 1
        let p = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let bc = CandidateSet::from_element(1, 1, 0.0);
        let b = CandidateSet::from_element(1, 1, 1.0);
        let (_, bad) = enforce_constraints(&p, &b, &bc).unwrap();
        assert_eq!(bad, vec![0]);
    }

    #[test]
    fn tentative_1d_constant() {
        let s = path(8);
        let agg = greedy_aggregate(&s).unwrap();
        let n = root_node_pattern(&agg.pattern, &agg.roots).unwrap();
        let b = CandidateSet::from_element(8, 1, 1.0);
        let tent = inject_tentative(&agg, &n, &b, 1).unwrap();
        assert_eq!(tent.t, agg.pattern);
        assert_eq!(tent.bc, CandidateSet::from_element(3, 1, 1.0));
        assert!(tent.degenerate_aggregates.is_empty());
        assert_eq!(constraint_residual(&tent.t, &b, &tent.bc).unwrap(), 0.0);
    }

    #[test]
    fn extra_candidates_fitted_on_wider_pattern() {
        // degree 3 lets node 7 see two aggregates, which a linear candidate needs
        let s = path(8);
        let agg = greedy_aggregate(&s).unwrap();
        let wide = crate::interpolation::sparsity_pattern(&s, &agg.pattern, 3).unwrap();
        let n = root_node_pattern(&wide, &agg.roots).unwrap();
        let b = CandidateSet::from_fn(8, 2, |i, l| if l == 0 { 1.0 } else { i as f64 + 1.0 });
        let tent = inject_tentative(&agg, &n, &b, 1).unwrap();
        assert!(tent.inconsistent_rows.is_empty());
        assert!(constraint_residual(&tent.t, &b, &tent.bc).unwrap() < 1e-12 * 8.0);
        for (j, &r) in agg.roots.iter().enumerate() {
            assert_eq!(tent.t.row(r), (&[j][..], &[1.0][..]));
        }
    }

    #[test]
    fn zero_root_value_is_degenerate() {
        let s = path(4);
        let agg = greedy_aggregate(&s).unwrap();
        let n = root_node_pattern(&agg.pattern, &agg.roots).unwrap();
        let b = CandidateSet::from_fn(4, 1, |i, _| if i == agg.roots[0] { 0.0 } else { 1.0 });
        let tent = inject_tentative(&agg, &n, &b, 1).unwrap();
        assert_eq!(tent.degenerate_aggregates, vec![0]);
    }
}
