use amg_core::problems::{elasticity_full, generate, half_grid_reynolds, rigid_body_modes, Material, ProblemKind, ProblemSpec};
use proptest::prelude::*;

fn kinds() -> impl Strategy<Value = ProblemKind> {
    prop_oneof![
        Just(ProblemKind::Poisson1d),
        Just(ProblemKind::Poisson2d),
        Just(ProblemKind::Poisson3d),
        Just(ProblemKind::Aniso3d),
        Just(ProblemKind::RotatedAniso2d),
        Just(ProblemKind::RecircFlow),
        Just(ProblemKind::UpwindTransport),
        Just(ProblemKind::Elasticity2d),
    ]
}

fn expected_rows(spec: &ProblemSpec) -> usize {
    let n = spec.n;
    match spec.kind {
        ProblemKind::Poisson1d => n,
        ProblemKind::Poisson3d | ProblemKind::Aniso3d => n * n * n,
        ProblemKind::Elasticity2d => 2 * n * (spec.ny + 1),
        _ => n * n,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_systems_are_well_formed(kind in kinds(), n in 3usize..12, psi_k in 0usize..16) {
        let mut spec = ProblemSpec::new(kind, n);
        spec.psi = psi_k as f64 * std::f64::consts::PI / 16.0;
        spec.ny = 2;
        spec.material = Material::Sns;
        let p = generate(&spec).unwrap();
        let rows = expected_rows(&spec);
        prop_assert_eq!(p.a.n_rows(), rows);
        prop_assert!(p.a.is_square());
        prop_assert_eq!(p.rhs.len(), rows);
        prop_assert_eq!(p.b.nrows(), rows);
        prop_assert_eq!(kind.is_symmetric(), p.a.is_symmetric(1e-12));
        prop_assert_eq!(p.b_hat.is_some(), !kind.is_symmetric());
        prop_assert!(p.a.diagonal().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn rigid_body_modes_span_the_unconstrained_kernel(nx in 1usize..8, ny in 1usize..4, nu in 0.0f64..0.49) {
        let (a, coords) = elasticity_full(nx, ny, 1.0, nu);
        let b = rigid_body_modes(&coords);
        let scale = a.max_abs();
        for j in 0..3 {
            let col: Vec<f64> = b.column(j).iter().copied().collect();
            let r = a.spmv(&col).unwrap();
            prop_assert!(r.iter().all(|v| v.abs() <= 1e-12 * scale));
        }
    }
}

#[test]
fn diffusion_rows_sum_to_boundary_coupling() {
    // interior rows of the 5-point Laplacian annihilate constants
    let p = generate(&ProblemSpec::new(ProblemKind::Poisson2d, 6)).unwrap();
    let ones = vec![1.0; p.a.n_rows()];
    let s = p.a.spmv(&ones).unwrap();
    assert!(s.iter().all(|&v| v >= -1e-12));
    let interior = 6 * 2 + 2;
    assert!(s[interior].abs() < 1e-12);
    assert!(s[0] > 0.0);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = ProblemSpec::new(ProblemKind::Poisson2d, 1);
    assert!(generate(&s).is_err());
    s.n = 8;
    s.psi = 4.0;
    assert!(generate(&s).is_err());
    let mut r = ProblemSpec::new(ProblemKind::RecircFlow, 8);
    r.eps = Some(0.0);
    assert!(generate(&r).is_err());
    assert!(half_grid_reynolds(1.0, 0.1, 0.0).is_err());
    assert!((half_grid_reynolds(2.0, 0.1, 0.5).unwrap() - 0.2).abs() < 1e-15);
}
