use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Hierarchy, Level, Method, SetupDiagnostics, SetupOptions};
use crate::complexity::{Bucket, WorkLedger};
use crate::error::{check_dim, invalid, AmgError, Result};
use crate::sparse::{galerkin_product_counted, SparseMatrix};
use crate::strength::{classical_strength, Measure};

/// Threshold used by the C/F setup when the options carry a non-classical
/// strength measure.
pub const DEFAULT_CF_THETA: f64 = 0.25;

/// First-pass Ruge-Stueben splitting. Returns `(C, F)`, both ascending.
///
/// The measure of a node is the number of nodes that strongly depend on it.
/// The undecided node of largest measure (lowest index on ties) becomes C,
/// the undecided nodes depending on it become F, and every undecided node
/// those new F-points depend on gains one in measure. Nodes left over with
/// no connections become C.
pub fn rs_split(s: &SparseMatrix) -> Result<(Vec<usize>, Vec<usize>)> {
    if !s.is_square() {
        return invalid("rs_split needs a square strength matrix");
    }
    let n = s.n_rows();
    // influence lists: st.row(i) = nodes that strongly depend on i
    let st = s.transpose();
    let mut lambda: Vec<usize> = (0..n)
        .map(|i| st.row(i).0.iter().filter(|&&j| j != i).count())
        .collect();
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Undecided,
        C,
        F,
    }
    let mut state = vec![State::Undecided; n];
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> =
        (0..n).map(|i| (lambda[i], Reverse(i))).collect();
    while let Some((l, Reverse(i))) = heap.pop() {
        if state[i] != State::Undecided || l != lambda[i] {
            continue;
        }
        state[i] = State::C;
        for &j in st.row(i).0 {
            if j == i || state[j] != State::Undecided {
                continue;
            }
            state[j] = State::F;
            for &k in s.row(j).0 {
                if k != j && state[k] == State::Undecided {
                    lambda[k] += 1;
                    heap.push((lambda[k], Reverse(k)));
                }
            }
        }
    }
    let c = (0..n).filter(|&i| state[i] == State::C).collect();
    let f = (0..n).filter(|&i| state[i] == State::F).collect();
    Ok((c, f))
}

/// Classical direct interpolation with separate treatment of negative and
/// positive couplings. For an F-point `i` with strong C-neighbours `C_i`,
/// `w_ij = -(sum_{k != i} a_ik^- / sum_{k in C_i} a_ik^-) a_ij / a_ii` for
/// `a_ij < 0`, and likewise for positive entries; a sign class without strong
/// C-neighbours is lumped into the diagonal. C-rows are unit rows.
pub fn direct_interpolation(
    a: &SparseMatrix,
    s: &SparseMatrix,
    c: &[usize],
    f: &[usize],
) -> Result<SparseMatrix> {
    let n = a.n_rows();
    check_dim("direct_interpolation", n, s.n_rows())?;
    if c.len() + f.len() != n {
        return invalid("C and F must partition the nodes");
    }
    let mut cidx = vec![usize::MAX; n];
    for (k, &i) in c.iter().enumerate() {
        cidx[i] = k;
    }
    let mut is_f = vec![false; n];
    for &i in f {
        if cidx[i] != usize::MAX || is_f[i] {
            return invalid(format!("node {i} appears twice in the splitting"));
        }
        is_f[i] = true;
    }
    let mut trip = Vec::new();
    for i in 0..n {
        if !is_f[i] {
            trip.push((i, cidx[i], 1.0));
            continue;
        }
        let strong_c: Vec<usize> = s
            .row(i)
            .0
            .iter()
            .copied()
            .filter(|&j| j != i && cidx[j] != usize::MAX)
            .collect();
        let is_strong_c = |j: usize| strong_c.binary_search(&j).is_ok();
        let (mut neg_all, mut pos_all, mut neg_c, mut pos_c, mut d) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (j, v) in a.row_iter(i) {
            if j == i {
                d = v;
                continue;
            }
            if v < 0.0 {
                neg_all += v;
                if is_strong_c(j) {
                    neg_c += v;
                }
            } else {
                pos_all += v;
                if is_strong_c(j) {
                    pos_c += v;
                }
            }
        }
        if neg_c == 0.0 && pos_c == 0.0 {
            return Err(AmgError::Structure(format!(
                "F-point {i} has no strong C-neighbour to interpolate from"
            )));
        }
        if neg_c == 0.0 {
            d += neg_all;
        }
        if pos_c == 0.0 {
            d += pos_all;
        }
        if d == 0.0 {
            return Err(AmgError::SingularDiagonal(i));
        }
        for (j, v) in a.row_iter(i) {
            if j == i || !is_strong_c(j) {
                continue;
            }
            let w = if v < 0.0 {
                -(neg_all / neg_c) * v / d
            } else {
                -(pos_all / pos_c) * v / d
            };
            trip.push((i, cidx[j], w));
        }
    }
    SparseMatrix::from_triplets(n, c.len(), &trip)
}

/// Promotes F-points without a strong C-neighbour to C. Returns the number
/// of promotions.
fn repair_split(s: &SparseMatrix, c: &mut Vec<usize>, f: &mut Vec<usize>) -> usize {
    let n = s.n_rows();
    let mut is_c = vec![false; n];
    for &i in c.iter() {
        is_c[i] = true;
    }
    let mut promoted = 0;
    for &i in f.iter() {
        if !s.row(i).0.iter().any(|&j| j != i && is_c[j]) {
            is_c[i] = true;
            promoted += 1;
        }
    }
    if promoted > 0 {
        *c = (0..n).filter(|&i| is_c[i]).collect();
        *f = (0..n).filter(|&i| !is_c[i]).collect();
    }
    promoted
}

/// Classical C/F setup with direct interpolation and `R = P^T`.
pub fn cf_setup(a: &SparseMatrix, opts: &SetupOptions) -> Result<Hierarchy> {
    opts.validate()?;
    if !a.is_square() {
        return invalid("setup needs a square matrix");
    }
    let theta = match opts.strength.measure {
        Measure::Classical => opts.strength.drop_tol,
        _ => DEFAULT_CF_THETA,
    };
    let mut ledger = WorkLedger::new(a.nnz());
    let mut diag = SetupDiagnostics::default();
    let mut levels = Vec::new();
    let mut stagnated = false;
    let mut a_l = a.clone();
    while a_l.n_rows() > opts.max_size && levels.len() + 1 < opts.max_levels {
        let s = classical_strength(&a_l, theta)?;
        ledger.charge_spmv(Bucket::Aggregation, &a_l);
        let (mut c, mut f) = rs_split(&s)?;
        ledger.charge(Bucket::Aggregation, 2 * s.nnz() as u64);
        diag.promoted_f_points += repair_split(&s, &mut c, &mut f);
        if c.len() >= a_l.n_rows() {
            stagnated = true;
            break;
        }
        let p = direct_interpolation(&a_l, &s, &c, &f)?;
        ledger.charge_spmv(Bucket::P, &a_l);
        let r = p.transpose();
        let (ac, flops) = galerkin_product_counted(&r, &a_l, &p)?;
        ledger.charge(Bucket::Rap, flops);
        levels.push(Level {
            a: std::mem::replace(&mut a_l, ac),
            p: Some(p),
            r: Some(r),
            candidates: None,
            coarse_candidates: None,
            c_points: Some(c),
        });
    }
    levels.push(Level {
        a: a_l,
        p: None,
        r: None,
        candidates: None,
        coarse_candidates: None,
        c_points: None,
    });
    let mut h = Hierarchy::from_levels(levels, ledger, Method::Cf, opts.relax)?;
    h.stagnated = stagnated;
    h.block_size = 1;
    h.diagnostics = diag;
    Ok(h)
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

    #[test]
    fn path_splits_alternately() {
        let s = classical_strength(&poisson(9), 0.25).unwrap();
        let (c, f) = rs_split(&s).unwrap();
        assert_eq!(c, vec![1, 3, 5, 7]);
        assert_eq!(f, vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn diagonal_strength_makes_everything_coarse() {
        let s = SparseMatrix::identity(5);
        let (c, f) = rs_split(&s).unwrap();
        assert_eq!(c.len(), 5);
        assert!(f.is_empty());
    }

    #[test]
    fn interior_weights_are_one_half() {
        let a = poisson(9);
        let s = classical_strength(&a, 0.25).unwrap();
        let (c, f) = rs_split(&s).unwrap();
        let p = direct_interpolation(&a, &s, &c, &f).unwrap();
        // node 4 lies between C-points 3 and 5 (coarse indices 1 and 2)
        assert_eq!(p.row(4).0, &[1, 2]);
        assert!(p.row(4).1.iter().all(|&w| (w - 0.5).abs() < 1e-15));
        // C rows are unit rows
        assert_eq!(p.row(3), (&[1usize][..], &[1.0][..]));
    }

    #[test]
    fn single_neighbour_with_zero_row_sum_gets_weight_one() {
        // Neumann-type end row: 1 -1
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 1.0)],
        )
        .unwrap();
        let s = classical_strength(&a, 0.25).unwrap();
        let p = direct_interpolation(&a, &s, &[1], &[0, 2]).unwrap();
        assert!((p.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((p.get(2, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn missing_c_neighbour_is_an_error() {
        let a = poisson(3);
        let s = classical_strength(&a, 0.25).unwrap();
        assert!(direct_interpolation(&a, &s, &[0], &[1, 2]).is_err());
    }

    #[test]
    fn identity_stays_single_level() {
        let h = cf_setup(&SparseMatrix::identity(50), &SetupOptions::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
    }
}
