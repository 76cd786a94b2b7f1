//! Greedy aggregation and block (un)amalgamation of aggregation patterns.

use crate::error::{invalid, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    /// `n x n_agg` binary matrix, `C(i, j) = 1` iff node `i` is in aggregate `j`.
    pub pattern: SparseMatrix,
    /// Root node of every aggregate.
    pub roots: Vec<usize>,
    /// Nodes not covered by the first pass.
    pub unaggregated: Vec<usize>,
}

impl Aggregation {
    pub fn n_aggregates(&self) -> usize {
        self.roots.len()
    }

    /// Aggregate index of every node.
    pub fn membership(&self) -> Vec<usize> {
        (0..self.pattern.n_rows())
            .map(|i| self.pattern.row(i).0[0])
            .collect()
    }
}

/// Two-pass greedy aggregation of a normalized strength matrix.
///
/// Pass one visits nodes in ascending order; a node with at least one strong
/// neighbour becomes a root if it and all its strong neighbours are still
/// free, and its neighbourhood forms the aggregate. Pass two attaches every
/// remaining node to the first-pass aggregate it is most strongly connected
/// to (ties go to the lower aggregate index); nodes without such a
/// connection become singleton aggregates.
pub fn greedy_aggregate(s: &SparseMatrix) -> Result<Aggregation> {
    if !s.is_square() {
        return invalid("aggregation needs a square strength matrix");
    }
    let n = s.n_rows();
    const FREE: usize = usize::MAX;
    let mut agg = vec![FREE; n];
    let mut roots = Vec::new();

    for i in 0..n {
        if agg[i] != FREE {
            continue;
        }
        let (cols, _) = s.row(i);
        let mut has_neighbour = false;
        let mut all_free = true;
        for &j in cols {
            if j != i {
                has_neighbour = true;
                all_free &= agg[j] == FREE;
            }
        }
        if has_neighbour && all_free {
            let id = roots.len();
            roots.push(i);
            agg[i] = id;
            for &j in cols {
                agg[j] = id;
            }
        }
    }

    let unaggregated: Vec<usize> = (0..n).filter(|&i| agg[i] == FREE).collect();
    let first_pass = agg.clone();
    for &i in &unaggregated {
        let mut best: Option<(f64, usize)> = None;
        for (j, v) in s.row_iter(i) {
            let a = first_pass[j];
            if j == i || a == FREE {
                continue;
            }
            best = match best {
                Some((bv, ba)) if bv > v || (bv == v && ba <= a) => Some((bv, ba)),
                _ => Some((v, a)),
            };
        }
        agg[i] = match best {
            Some((_, a)) => a,
            None => {
                roots.push(i);
                roots.len() - 1
            }
        };
    }

    let n_agg = roots.len();
    let pattern = SparseMatrix::from_canonical(n, n_agg, (0..=n).collect(), agg, vec![1.0; n]);
    Ok(Aggregation {
        pattern,
        roots,
        unaggregated,
    })
}

/// Expands a nodal pattern to degrees of freedom with block size `m`:
/// `N_dof(i, j) = N(i / m, j / m)`. Each nodal root `r` becomes the DOF roots
/// `m r, ..., m r + m - 1`.
pub fn unamalgamate(
    n: &SparseMatrix,
    roots: &[usize],
    m: usize,
) -> Result<(SparseMatrix, Vec<usize>)> {
    if m == 0 {
        return invalid("block size must be positive");
    }
    if m == 1 {
        return Ok((n.clone(), roots.to_vec()));
    }
    let mut offsets = Vec::with_capacity(n.n_rows() * m + 1);
    let mut cols = Vec::with_capacity(n.nnz() * m * m);
    let mut vals = Vec::with_capacity(n.nnz() * m * m);
    offsets.push(0);
    for bi in 0..n.n_rows() {
        for _ in 0..m {
            for (bj, v) in n.row_iter(bi) {
                for c in 0..m {
                    cols.push(bj * m + c);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
    }
    let dof = SparseMatrix::from_canonical(n.n_rows() * m, n.n_cols() * m, offsets, cols, vals)
        .with_block_size(m)?;
    let dof_roots = roots
        .iter()
        .flat_map(|&r| (0..m).map(move |c| r * m + c))
        .collect();
    Ok((dof, dof_roots))
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn members(a: &Aggregation) -> Vec<Vec<usize>> {
        let m = a.membership();
        (0..a.n_aggregates())
            .map(|k| (0..m.len()).filter(|&i| m[i] == k).collect())
            .collect()
    }

    #[test]
    fn path_graphs() {
        let a = greedy_aggregate(&path(8)).unwrap();
        assert_eq!(members(&a), vec![vec![0, 1], vec![2, 3, 4], vec![5, 6, 7]]);
        assert_eq!(a.roots, vec![0, 3, 6]);
        assert!(a.unaggregated.is_empty());

        let a = greedy_aggregate(&path(5)).unwrap();
        assert_eq!(members(&a), vec![vec![0, 1], vec![2, 3, 4]]);
        assert_eq!(a.roots, vec![0, 3]);
    }

    #[test]
    fn diagonal_gives_singletons() {
        let a = greedy_aggregate(&SparseMatrix::identity(4)).unwrap();
        assert_eq!(a.roots, vec![0, 1, 2, 3]);
        assert_eq!(a.pattern, SparseMatrix::identity(4));
    }

    #[test]
    fn second_pass_picks_strongest() {
        // 0-1 and 3-4 form aggregates; 2 is tied weakly to 1 and strongly to 3
        let s = SparseMatrix::from_triplets(
            5,
            5,
            &[
                (0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0),
                (2, 1, 0.3), (2, 2, 1.0), (2, 3, 0.9),
                (3, 3, 1.0), (3, 4, 1.0), (4, 3, 1.0), (4, 4, 1.0),
            ],
        )
        .unwrap();
        let a = greedy_aggregate(&s).unwrap();
        assert_eq!(a.unaggregated, vec![2]);
        assert_eq!(a.membership(), vec![0, 0, 1, 1, 1]);
    }

    #[test]
    fn unamalgamate_blocks() {
        let n = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let (d, r) = unamalgamate(&n, &[3], 2).unwrap();
        assert_eq!(d.to_dense(), nalgebra::DMatrix::from_element(4, 2, 1.0));
        assert_eq!(r, vec![6, 7]);
        let (d1, r1) = unamalgamate(&n, &[1], 1).unwrap();
        assert_eq!((d1, r1), (n, vec![1]));
    }
}
