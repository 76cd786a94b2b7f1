use super::FilterSpec;
use crate::error::{check_dim, invalid, Result};
use crate::sparse::{filter_matrix, SparseMatrix};

/// `N = S^d C`; `d = 0` returns `C`.
pub fn sparsity_pattern(s: &SparseMatrix, c: &SparseMatrix, d: usize) -> Result<SparseMatrix> {
    sparsity_pattern_counted(s, c, d).map(|(n, _)| n)
}

pub(crate) fn sparsity_pattern_counted(
    s: &SparseMatrix,
    c: &SparseMatrix,
    d: usize,
) -> Result<(SparseMatrix, u64)> {
    check_dim("sparsity_pattern", s.n_cols(), c.n_rows())?;
    let mut n = c.clone();
    let mut flops = 0;
    for _ in 0..d {
        flops += s.matmul_flops(&n);
        n = s.matmul(&n)?;
    }
    Ok((n, flops))
}

/// Filters the (rectangular) pattern matrix before it is used.
pub fn prefilter(n: &SparseMatrix, spec: &FilterSpec) -> Result<SparseMatrix> {
    filter_matrix(n, spec.theta, spec.k)
}

/// `filtered` with the rows listed in `rows` replaced by those of `full`.
pub fn restore_rows(filtered: &SparseMatrix, full: &SparseMatrix, rows: &[usize]) -> Result<SparseMatrix> {
    let mut take = vec![false; filtered.n_rows()];
    rows.iter().for_each(|&i| take[i] = true);
    let mut trip = Vec::with_capacity(full.nnz());
    for i in 0..filtered.n_rows() {
        let src = if take[i] { full } else { filtered };
        trip.extend(src.row_iter(i).map(|(j, v)| (i, j, v)));
    }
    SparseMatrix::from_triplets(filtered.n_rows(), filtered.n_cols(), &trip)
}

/// Replaces row `roots[j]` by the unit row `e_j`.
pub fn root_node_pattern(n: &SparseMatrix, roots: &[usize]) -> Result<SparseMatrix> {
    check_dim("root_node_pattern", n.n_cols(), roots.len())?;
    let mut owner = vec![usize::MAX; n.n_rows()];
    for (j, &r) in roots.iter().enumerate() {
        if r >= n.n_rows() {
            return invalid(format!("root {r} out of range for {} rows", n.n_rows()));
        }
        if owner[r] != usize::MAX {
            return invalid(format!("node {r} is the root of two aggregates"));
        }
        owner[r] = j;
    }
    let mut offsets = vec![0];
    let mut cols = Vec::with_capacity(n.nnz());
    let mut vals = Vec::with_capacity(n.nnz());
    for i in 0..n.n_rows() {
        if owner[i] != usize::MAX {
            cols.push(owner[i]);
            vals.push(1.0);
        } else {
            let (c, v) = n.row(i);
            cols.extend_from_slice(c);
            vals.extend_from_slice(v);
        }
        offsets.push(cols.len());
    }
    let out = SparseMatrix::from_canonical(n.n_rows(), n.n_cols(), offsets, cols, vals);
    if n.block_size() > 1 {
        out.with_block_size(n.block_size())
    } else {
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::greedy_aggregate;

    #[test]
    fn restored_rows_come_from_the_full_pattern() {
        let full = SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0), (2, 0, 4.0), (2, 1, 5.0)])
            .unwrap();
        let filtered = SparseMatrix::from_triplets(3, 2, &[(0, 1, 2.0), (1, 1, 3.0), (2, 1, 5.0)]).unwrap();
        let r = restore_rows(&filtered, &full, &[2]).unwrap();
        assert_eq!(r.row(0), filtered.row(0));
        assert_eq!(r.row(2), full.row(2));
        assert_eq!(restore_rows(&filtered, &full, &[]).unwrap(), filtered);
    }

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
    fn degree_one_grows_by_one_edge() {
        let s = path(8);
        let agg = greedy_aggregate(&s).unwrap();
        assert_eq!(sparsity_pattern(&s, &agg.pattern, 0).unwrap(), agg.pattern);
        let n = sparsity_pattern(&s, &agg.pattern, 1).unwrap();
        let col1: Vec<usize> = (0..8).filter(|&i| n.get(i, 1) != 0.0).collect();
        assert_eq!(col1, vec![1, 2, 3, 4, 5]);
        assert!(n.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn root_rows_become_identity() {
        let n = SparseMatrix::from_triplets(3, 1, &[(0, 0, 2.0), (1, 0, 3.0), (2, 0, 4.0)]).unwrap();
        let r = root_node_pattern(&n, &[1]).unwrap();
        assert_eq!(r.get(1, 0), 1.0);
        assert_eq!(r.get(0, 0), 2.0);
        assert_eq!(root_node_pattern(&r, &[1]).unwrap(), r);
        let two = SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        assert!(root_node_pattern(&two, &[0, 0]).is_err());
    }
}
