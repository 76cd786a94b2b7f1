//! Compressed sparse-row matrices and the kernels the rest of the crate is
//! built on.
//!
//! Every [`SparseMatrix`] is kept in canonical form: columns strictly
//! increasing within a row, no duplicates and no stored zeros. All
//! constructors normalize their input, so two matrices with the same entries
//! compare equal bitwise.

pub mod io;

use nalgebra::DMatrix;

use crate::error::{check_dim, invalid, AmgError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    block_size: usize,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays. Rows may be unsorted and may
    /// contain duplicates (summed) or zeros (dropped).
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(AmgError::Structure(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != col_indices.len() {
            return Err(AmgError::Structure(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(AmgError::Structure(
                "col_indices and values differ in length".into(),
            ));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(AmgError::Structure("row_offsets is decreasing".into()));
        }
        if let Some(&c) = col_indices.iter().find(|&&c| c >= n_cols) {
            return Err(AmgError::Structure(format!(
                "column index {c} out of range for {n_cols} columns"
            )));
        }

        let mut offsets = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::with_capacity(col_indices.len());
        let mut vals = Vec::with_capacity(values.len());
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        offsets.push(0);
        for i in 0..n_rows {
            scratch.clear();
            scratch.extend(
                (row_offsets[i]..row_offsets[i + 1]).map(|p| (col_indices[p], values[p])),
            );
            scratch.sort_by_key(|e| e.0);
            let mut p = 0;
            while p < scratch.len() {
                let c = scratch[p].0;
                let mut v = 0.0;
                while p < scratch.len() && scratch[p].0 == c {
                    v += scratch[p].1;
                    p += 1;
                }
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        Ok(Self::from_canonical(n_rows, n_cols, offsets, cols, vals))
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(AmgError::Structure(format!(
                    "triplet ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        Self::new(n_rows, n_cols, counts, cols, vals)
    }

    /// Trusted constructor for kernels whose output is already canonical.
    pub(crate) fn from_canonical(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_offsets.len(), n_rows + 1);
        debug_assert!(values.iter().all(|&v| v != 0.0));
        Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
            block_size: 1,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_canonical(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::from_canonical(n_rows, n_cols, vec![0; n_rows + 1], Vec::new(), Vec::new())
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        Self::from_canonical(a.nrows(), a.ncols(), offsets, cols, vals)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row_iter(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Attaches block-size metadata; both dimensions must be multiples of `m`.
    pub fn with_block_size(mut self, m: usize) -> Result<Self> {
        if m == 0 || !self.n_rows.is_multiple_of(m) || !self.n_cols.is_multiple_of(m) {
            return invalid(format!(
                "block size {m} does not divide {}x{}",
                self.n_rows, self.n_cols
            ));
        }
        self.block_size = m;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    #[inline]
    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (c, v) = self.row(i);
        c.iter().copied().zip(v.iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(p) => v[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Returns a copy with every value passed through `f`; zeros produced by
    /// `f` are dropped.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut offsets = vec![0];
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row_iter(i) {
                let w = f(i, j, v);
                if w != 0.0 {
                    cols.push(j);
                    vals.push(w);
                }
            }
            offsets.push(cols.len());
        }
        let mut out = Self::from_canonical(self.n_rows, self.n_cols, offsets, cols, vals);
        out.block_size = self.block_size;
        out
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("spmv", self.n_cols, x.len())?;
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without allocation. Panics on length mismatch.
    #[inline]
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = 0.0;
            for p in s..e {
                acc += self.values[p] * x[self.col_indices[p]];
            }
            *yi = acc;
        }
    }

    /// `r = b - A x` without allocation.
    #[inline]
    pub fn residual_into(&self, x: &[f64], b: &[f64], r: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(b.len(), self.n_rows);
        for (i, ri) in r.iter_mut().enumerate() {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = b[i];
            for p in s..e {
                acc -= self.values[p] * x[self.col_indices[p]];
            }
            *ri = acc;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut cols = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for (j, v) in self.row_iter(i) {
                cols[next[j]] = i;
                vals[next[j]] = v;
                next[j] += 1;
            }
        }
        let mut t = Self::from_canonical(self.n_cols, self.n_rows, counts, cols, vals);
        t.block_size = self.block_size;
        t
    }

    /// Exact sparse product `A B` (row-wise Gustavson); cancellations that
    /// produce exact zeros are dropped.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        check_dim("matmul", self.n_cols, other.n_rows)?;
        let n_out = other.n_cols;
        let mut marker = vec![usize::MAX; n_out];
        let mut acc = vec![0.0; n_out];
        let mut row_cols: Vec<usize> = Vec::new();
        let mut offsets = Vec::with_capacity(self.n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for i in 0..self.n_rows {
            row_cols.clear();
            for (k, a) in self.row_iter(i) {
                let (bc, bv) = other.row(k);
                for (&j, &b) in bc.iter().zip(bv) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = a * b;
                        row_cols.push(j);
                    } else {
                        acc[j] += a * b;
                    }
                }
            }
            row_cols.sort_unstable();
            for &j in &row_cols {
                if acc[j] != 0.0 {
                    cols.push(j);
                    vals.push(acc[j]);
                }
            }
            offsets.push(cols.len());
        }
        Ok(Self::from_canonical(self.n_rows, n_out, offsets, cols, vals))
    }

    /// Multiply count of `self.matmul(other)`:
    /// `sum_i sum_{k in row i} nnz(row k of other)`.
    pub fn matmul_flops(&self, other: &SparseMatrix) -> u64 {
        self.col_indices
            .iter()
            .map(|&k| other.row_nnz(k) as u64)
            .sum()
    }

    /// `max |A - A^T| <= tol * max |A|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        let scale = self.max_abs();
        let bound = tol * scale;
        for i in 0..self.n_rows {
            let (ac, av) = self.row(i);
            let (tc, tv) = t.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < tc.len() {
                let diff = match (ac.get(p), tc.get(q)) {
                    (Some(&a), Some(&b)) if a == b => {
                        let d = av[p] - tv[q];
                        p += 1;
                        q += 1;
                        d
                    }
                    (Some(&a), Some(&b)) if a < b => {
                        p += 1;
                        av[p - 1]
                    }
                    (Some(_), None) => {
                        p += 1;
                        av[p - 1]
                    }
                    _ => {
                        q += 1;
                        tv[q - 1]
                    }
                };
                if diff.abs() > bound {
                    return false;
                }
            }
        }
        true
    }

    /// Linear combination `alpha A + beta B` of equally sized matrices.
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        check_dim("add_scaled", self.n_rows, other.n_rows)?;
        check_dim("add_scaled", self.n_cols, other.n_cols)?;
        let mut offsets = vec![0];
        let mut cols = Vec::with_capacity(self.nnz() + other.nnz());
        let mut vals = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                let (c, v) = match (ac.get(p), bc.get(q)) {
                    (Some(&a), Some(&b)) if a == b => {
                        p += 1;
                        q += 1;
                        (a, alpha * av[p - 1] + beta * bv[q - 1])
                    }
                    (Some(&a), Some(&b)) if a < b => {
                        p += 1;
                        (a, alpha * av[p - 1])
                    }
                    (Some(&a), None) => {
                        p += 1;
                        (a, alpha * av[p - 1])
                    }
                    (_, Some(&b)) => {
                        q += 1;
                        (b, beta * bv[q - 1])
                    }
                    (None, None) => unreachable!(),
                };
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        Ok(Self::from_canonical(self.n_rows, self.n_cols, offsets, cols, vals))
    }

    /// Same nonzero layout (values ignored).
    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }
}

/// Galerkin triple product `R A P`.
pub fn galerkin_product(
    r: &SparseMatrix,
    a: &SparseMatrix,
    p: &SparseMatrix,
) -> Result<SparseMatrix> {
    galerkin_product_counted(r, a, p).map(|(c, _)| c)
}

/// [`galerkin_product`] together with its multiply count.
pub fn galerkin_product_counted(
    r: &SparseMatrix,
    a: &SparseMatrix,
    p: &SparseMatrix,
) -> Result<(SparseMatrix, u64)> {
    check_dim("galerkin_product", r.n_cols(), a.n_rows())?;
    check_dim("galerkin_product", a.n_cols(), p.n_rows())?;
    let ra = r.matmul(a)?;
    let flops = r.matmul_flops(a) + ra.matmul_flops(p);
    Ok((ra.matmul(p)?, flops))
}

/// Row-wise magnitude filter.
///
/// With `k`, every entry smaller in magnitude than the k-th largest
/// off-diagonal magnitude of its row is dropped; with `theta`, every entry
/// below `theta` times the largest off-diagonal magnitude is dropped. Both
/// comparisons are strict, so ties with the threshold survive. Diagonal
/// entries of square matrices are never removed and never count as
/// off-diagonal; rectangular matrices have no diagonal.
pub fn filter_matrix(
    g: &SparseMatrix,
    theta: Option<f64>,
    k: Option<usize>,
) -> Result<SparseMatrix> {
    let square = g.is_square();
    filter_rows(g, theta, k, |i, j| square && i == j, |_| false)
}

/// Filter with a caller-supplied notion of protected entries and rows.
/// Protected entries are kept and excluded from the row maxima; protected
/// rows are copied unchanged.
pub(crate) fn filter_rows(
    g: &SparseMatrix,
    theta: Option<f64>,
    k: Option<usize>,
    protected_entry: impl Fn(usize, usize) -> bool,
    protected_row: impl Fn(usize) -> bool,
) -> Result<SparseMatrix> {
    if let Some(t) = theta {
        if !(0.0..=1.0).contains(&t) {
            return invalid(format!("filter theta {t} outside [0, 1]"));
        }
    }
    if k == Some(0) {
        return invalid("filter k must be positive");
    }
    let mut mags: Vec<f64> = Vec::new();
    let mut offsets = vec![0];
    let mut cols = Vec::with_capacity(g.nnz());
    let mut vals = Vec::with_capacity(g.nnz());
    for i in 0..g.n_rows() {
        let (rc, rv) = g.row(i);
        if protected_row(i) {
            cols.extend_from_slice(rc);
            vals.extend_from_slice(rv);
            offsets.push(cols.len());
            continue;
        }
        mags.clear();
        mags.extend(
            rc.iter()
                .zip(rv)
                .filter(|(&j, _)| !protected_entry(i, j))
                .map(|(_, v)| v.abs()),
        );
        let mut threshold: f64 = 0.0;
        if let Some(k) = k {
            if mags.len() >= k {
                mags.sort_unstable_by(|a, b| b.total_cmp(a));
                threshold = threshold.max(mags[k - 1]);
            }
        }
        if let Some(t) = theta {
            let max = mags.iter().fold(0.0f64, |m, &v| m.max(v));
            threshold = threshold.max(t * max);
        }
        for (&j, &v) in rc.iter().zip(rv) {
            if protected_entry(i, j) || v.abs() >= threshold {
                cols.push(j);
                vals.push(v);
            }
        }
        offsets.push(cols.len());
    }
    let mut filtered = SparseMatrix::from_canonical(g.n_rows(), g.n_cols(), offsets, cols, vals);
    filtered.block_size = g.block_size;
    Ok(filtered)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn spmv_identity_and_tridiag() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(SparseMatrix::identity(3).spmv(&x).unwrap(), x.to_vec());
        assert_eq!(tridiag(3).spmv(&[1.0; 3]).unwrap(), vec![1.0, 0.0, 1.0]);
        assert!(tridiag(3).spmv(&[1.0; 2]).is_err());
    }

    #[test]
    fn constructor_normalizes() {
        let m = SparseMatrix::new(
            2,
            3,
            vec![0, 3, 4],
            vec![2, 0, 2, 1],
            vec![1.0, 4.0, 2.0, 0.0],
        )
        .unwrap();
        assert_eq!(m.col_indices(), &[0, 2]);
        assert_eq!(m.values(), &[4.0, 3.0]);
        assert_eq!(m.row_offsets(), &[0, 2, 2]);
        assert!(SparseMatrix::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(SparseMatrix::new(1, 2, vec![0, 1], vec![5], vec![1.0]).is_err());
    }

    #[test]
    fn transpose_small() {
        assert_eq!(SparseMatrix::identity(4).transpose(), SparseMatrix::identity(4));
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 2, 5.0)]).unwrap();
        let t = a.transpose();
        assert_eq!((t.n_rows(), t.n_cols()), (3, 2));
        assert_eq!(t.get(2, 0), 5.0);
        assert_eq!(t.nnz(), 1);
    }

    #[test]
    fn matmul_identity_and_permutations() {
        let a = tridiag(5);
        assert_eq!(a.matmul(&SparseMatrix::identity(5)).unwrap(), a);
        // p maps i -> (i + 1) % 4, q maps i -> (i + 2) % 4
        let perm = |s: usize| {
            let t: Vec<_> = (0..4).map(|i| (i, (i + s) % 4, 1.0)).collect();
            SparseMatrix::from_triplets(4, 4, &t).unwrap()
        };
        assert_eq!(perm(1).matmul(&perm(2)).unwrap(), perm(3));
        assert!(a.matmul(&SparseMatrix::identity(4)).is_err());
    }

    #[test]
    fn matmul_drops_cancellation() {
        let a = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().nnz(), 0);
        assert_eq!(a.matmul_flops(&b), 2);
    }

    #[test]
    fn galerkin_identity() {
        let a = tridiag(6);
        let i = SparseMatrix::identity(6);
        assert_eq!(galerkin_product(&i, &a, &i).unwrap(), a);
    }

    #[test]
    fn filter_by_count_and_tolerance() {
        // row 0: diagonal 10, off-diagonal magnitudes 4, 2, 1
        let g = SparseMatrix::from_triplets(
            2,
            4,
            &[(0, 0, 10.0), (0, 1, -4.0), (0, 2, 2.0), (0, 3, 1.0), (1, 1, 1.0)],
        )
        .unwrap();
        // rectangular: no diagonal, so the 10 counts as the largest entry
        let f = filter_matrix(&g, None, Some(2)).unwrap();
        assert_eq!(f.row(0).0, &[0, 1]);

        let sq = SparseMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 10.0), (0, 1, -4.0), (0, 2, 2.0), (0, 3, 1.0)],
        )
        .unwrap();
        let f = filter_matrix(&sq, None, Some(2)).unwrap();
        assert_eq!(f.row(0).0, &[0, 1, 2]);

        let t = SparseMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 0.3), (0, 3, 0.05)],
        )
        .unwrap();
        let f = filter_matrix(&t, Some(0.1), None).unwrap();
        assert_eq!(f.row(0).0, &[0, 1, 2]);
        assert_eq!(filter_matrix(&t, Some(0.0), None).unwrap(), t);
        assert!(filter_matrix(&t, Some(1.5), None).is_err());
        assert!(filter_matrix(&t, None, Some(0)).is_err());
    }

    #[test]
    fn filter_keeps_ties() {
        let t = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (0, 1, 2.0), (0, 2, 2.0)],
        )
        .unwrap();
        assert_eq!(filter_matrix(&t, None, Some(1)).unwrap(), t);
    }

    #[test]
    fn symmetry_check() {
        assert!(tridiag(5).is_symmetric(1e-12));
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(!a.is_symmetric(1e-12));
    }

    #[test]
    fn block_size_validation() {
        assert!(tridiag(4).with_block_size(2).is_ok());
        assert!(tridiag(5).with_block_size(2).is_err());
    }
}
