use amg_core::sparse::filter_matrix;
use amg_core::sparse::io::{format_matrix_market, parse_matrix_market};
use amg_core::SparseMatrix;
use proptest::prelude::*;

fn matrix(max: usize) -> impl Strategy<Value = SparseMatrix> {
    (1..max, 1..max).prop_flat_map(|(r, c)| {
        proptest::collection::vec((0..r, 0..c, -10.0f64..10.0), 0..3 * (r + c))
            .prop_map(move |t| SparseMatrix::from_triplets(r, c, &t).unwrap())
    })
}

fn square(max: usize) -> impl Strategy<Value = SparseMatrix> {
    (1..max).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n, -10.0f64..10.0), 0..4 * n)
            .prop_map(move |t| SparseMatrix::from_triplets(n, n, &t).unwrap())
    })
}

fn close(a: &SparseMatrix, b: &SparseMatrix) -> bool {
    let d = a.to_dense() - b.to_dense();
    a.n_rows() == b.n_rows() && a.n_cols() == b.n_cols() && d.amax() <= 1e-12 * (1.0 + a.max_abs())
}

proptest! {
    #[test]
    fn transpose_is_an_involution(a in matrix(30)) {
        prop_assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn product_transpose_reverses(a in matrix(20), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..20);
        let t: Vec<_> = (0..3 * k).map(|_| (rng.gen_range(0..a.n_cols()), rng.gen_range(0..k), rng.gen_range(-1.0..1.0))).collect();
        let b = SparseMatrix::from_triplets(a.n_cols(), k, &t).unwrap();
        let left = a.matmul(&b).unwrap().transpose();
        let right = b.transpose().matmul(&a.transpose()).unwrap();
        prop_assert!(close(&left, &right));
    }

    #[test]
    fn spmv_is_linear(a in matrix(30), s in -3.0f64..3.0) {
        let x: Vec<f64> = (0..a.n_cols()).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = (0..a.n_cols()).map(|i| (i as f64).cos()).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + s * q).collect();
        let lhs = a.spmv(&xy).unwrap();
        let (ax, ay) = (a.spmv(&x).unwrap(), a.spmv(&y).unwrap());
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - ax[i] - s * ay[i]).abs() <= 1e-11 * (1.0 + a.max_abs()));
        }
    }

    #[test]
    fn matrix_market_round_trips_exactly(a in matrix(30)) {
        prop_assert_eq!(parse_matrix_market(&format_matrix_market(&a)).unwrap(), a);
    }

    #[test]
    fn filtering_is_idempotent(a in square(25), theta in 0.0f64..1.0, k in 1usize..5) {
        for (t, k) in [(Some(theta), None), (None, Some(k)), (Some(theta), Some(k))] {
            let once = filter_matrix(&a, t, k).unwrap();
            let twice = filter_matrix(&once, t, k).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.nnz() <= a.nnz());
            prop_assert_eq!(once.diagonal(), a.diagonal());
        }
    }

    #[test]
    fn symmetric_part_is_symmetric(a in square(25)) {
        let s = a.add_scaled(0.5, &a.transpose(), 0.5).unwrap();
        prop_assert!(s.is_symmetric(1e-14));
    }
}

#[test]
fn malformed_input_is_rejected() {
    assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").is_err());
    assert!(parse_matrix_market("not a header\n").is_err());
    let a = SparseMatrix::identity(3);
    assert!(a.spmv(&[1.0, 2.0]).is_err());
    assert!(a.matmul(&SparseMatrix::identity(2)).is_err());
}
