//! Energy minimization on `A^T A` approaches the ideal interpolation of
//! `A^T A`, one column at a time.

use amg_core::complexity::WorkLedger;
use amg_core::interpolation::{energy_minimize, CandidateSet, InterpConfig, Krylov};
use amg_core::theory::{ideal_interpolation, CfPartition};
use amg_core::SparseMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Upwinded 1D convection-diffusion with a random reaction term.
fn convection_diffusion(n: usize, rng: &mut ChaCha8Rng) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0 + 3.0 + rng.gen_range(0.0..0.5)));
        if i > 0 {
            t.push((i, i - 1, -1.0 - 3.0));
        }
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
        }
    }
    SparseMatrix::from_triplets(n, n, &t).unwrap()
}

fn distances(a: &DMatrix<f64>, p: &SparseMatrix, ideal: &DMatrix<f64>) -> Vec<f64> {
    let diff = a * (p.to_dense() - ideal);
    (0..diff.ncols()).map(|j| diff.column(j).norm()).collect()
}

#[test]
fn gmres_energy_minimization_approaches_normal_equation_ideal() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let n = rng.gen_range(12..30);
        let a = convection_diffusion(n, &mut rng);
        let ad = a.to_dense();
        let c: Vec<usize> = (0..n).step_by(3).collect();
        let part = CfPartition::from_c_points(n, c.clone()).unwrap();
        let ideal = ideal_interpolation(&(ad.transpose() * &ad), &part).unwrap().p;
        let nc = c.len();
        let bc = CandidateSet::from_element(nc, 1, 1.0);
        let b = &ideal * &bc;

        // full F pattern; the start puts each F row's candidate value in column 0
        let mut pat = Vec::new();
        let mut start = Vec::new();
        for i in 0..n {
            match c.iter().position(|&r| r == i) {
                Some(j) => {
                    pat.push((i, j, 1.0));
                    start.push((i, j, 1.0));
                }
                None => {
                    pat.extend((0..nc).map(|j| (i, j, 1.0)));
                    start.push((i, 0, b[(i, 0)]));
                }
            }
        }
        let pat = SparseMatrix::from_triplets(n, nc, &pat).unwrap();
        let t = SparseMatrix::from_triplets(n, nc, &start).unwrap();

        let mut prev = distances(&ad, &t, &ideal);
        for iters in 1..=8 {
            let cfg = InterpConfig {
                energy_iters: Some(iters),
                krylov: Krylov::Gmres,
                ..Default::default()
            };
            let mut ledger = WorkLedger::new(a.nnz());
            let res = energy_minimize(&a, &t, &b, &bc, &pat, &c, &cfg, &mut ledger).unwrap();
            let d = distances(&ad, &res.p, &ideal);
            for (now, before) in d.iter().zip(&prev) {
                assert!(*now <= before * (1.0 + 1e-10) + 1e-13, "{now} > {before} after {iters} steps");
            }
            prev = d;
        }
        let first = distances(&ad, &t, &ideal).iter().cloned().fold(0.0, f64::max);
        let last = prev.iter().cloned().fold(0.0, f64::max);
        assert!(last < 0.5 * first, "no progress: {first} -> {last}");
    }
}
