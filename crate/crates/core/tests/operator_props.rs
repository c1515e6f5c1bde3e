use std::sync::Arc;

use eto_core::linalg::dense_eigenvalues;
use eto_core::operator::OperatorOptions;
use eto_core::ot::{kernel_matrix, solve_self_transport, solve_sinkhorn, EvalMode, SolverOptions};
use eto_core::spectral::{top_eigenpairs, SpectralOptions};
use eto_core::synth::{sample_torus_shift, TorusShiftSpec};
use eto_core::{build_operator, CostSpec, PointCloud, TransitionData, Variant};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(n: usize, d: usize, seed: u64) -> TransitionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = x.iter().map(|a| 0.7 * a + 0.2 + 0.05 * rng.random::<f64>()).collect();
    TransitionData::new(d, x, y).unwrap()
}

fn tight() -> OperatorOptions {
    OperatorOptions::default().with_solver(SolverOptions::default().with_tol(1e-12))
}

#[test]
fn huge_epsilon_collapses_to_averaging() {
    let data = random_data(60, 2, 1);
    let op = build_operator(
        &data,
        &CostSpec::SquaredEuclidean,
        1e6 * 2.0,
        Variant::Stationary,
        &tight(),
    )
    .unwrap();
    let s = top_eigenpairs(&op, 5, &SpectralOptions::default()).unwrap();
    assert!((s.eigenvalues[0].re - 1.0).abs() < 1e-9);
    assert!(s.moduli()[1..].iter().all(|m| *m < 0.01), "{:?}", s.moduli());
}

#[test]
fn lazy_and_dense_agree() {
    let data = sample_torus_shift(&TorusShiftSpec::mixture(0.05), 500, 3).unwrap();
    let cost = CostSpec::unit_torus(1);
    let dense = build_operator(
        &data,
        &cost,
        0.02,
        Variant::Stationary,
        &OperatorOptions::default().with_representation(EvalMode::Dense),
    )
    .unwrap();
    let lazy = build_operator(
        &data,
        &cost,
        0.02,
        Variant::Stationary,
        &OperatorOptions::default().with_representation(EvalMode::Lazy),
    )
    .unwrap();
    assert_eq!(dense.representation(), EvalMode::Dense);
    assert_eq!(lazy.representation(), EvalMode::Lazy);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u: Vec<f64> = (0..500).map(|_| rng.random::<f64>() - 0.5).collect();
    let a = dense.apply(&u).unwrap();
    let b = lazy.apply(&u).unwrap();
    let m = dense.dense_matrix();
    let c = &m * nalgebra::DVector::from_vec(u.clone());
    for i in 0..500 {
        assert!((a[i] - b[i]).abs() < 1e-10);
        assert!((a[i] - c[i]).abs() < 1e-10);
    }
}

#[test]
fn dense_entries_are_nonnegative_and_rows_stochastic() {
    let op = build_operator(
        &random_data(80, 1, 4),
        &CostSpec::SquaredEuclidean,
        0.05,
        Variant::Stationary,
        &tight(),
    )
    .unwrap();
    let m = op.dense_matrix();
    assert!(m.iter().all(|v| *v >= 0.0));
    for r in 0..m.nrows() {
        assert!((m.row(r).sum() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn adjoint_identity_in_weighted_inner_product() {
    let data = random_data(40, 2, 5);
    for variant in [Variant::Stationary, Variant::Nonstationary] {
        let op = build_operator(&data, &CostSpec::SquaredEuclidean, 0.1, variant, &tight()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let v: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let tu = op.apply(&u).unwrap();
        let tv = op.apply_adjoint(&v).unwrap();
        let lhs: f64 = tu.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&tv).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * 40.0);
    }
}

#[test]
fn torus_subdominant_modulus_matches_dense_oracle() {
    let data = sample_torus_shift(&TorusShiftSpec::single(0.0, 0.01), 1000, 2).unwrap();
    let op = build_operator(
        &data,
        &CostSpec::unit_torus(1),
        0.01,
        Variant::Stationary,
        &OperatorOptions::default(),
    )
    .unwrap();
    let s = top_eigenpairs(&op, 3, &SpectralOptions::default()).unwrap();
    let oracle = dense_eigenvalues(&op.dense_matrix());
    let l2 = s.eigenvalues[1].norm();
    assert!(l2 > 0.5 && l2 < 1.0, "{l2}");
    assert!((l2 - oracle[1].norm()).abs() < 1e-6);
}

/// Weighted operator matrix built straight from the Sinkhorn solves.
fn weighted_matrix(x: PointCloud, y: PointCloud, eps: f64) -> DMatrix<f64> {
    let (x, y) = (Arc::new(x), Arc::new(y));
    let opts = SolverOptions::default().with_tol(1e-13);
    let right = solve_self_transport(x.clone(), &CostSpec::SquaredEuclidean, eps, &opts).unwrap();
    let left = solve_sinkhorn(y.clone(), x.clone(), &CostSpec::SquaredEuclidean, eps, &opts).unwrap();
    let kr = kernel_matrix(&right, 1000).unwrap();
    let kl = kernel_matrix(&left, 1000).unwrap();
    let n = x.len();
    let r = DMatrix::from_fn(n, n, |j, i| x.weight(i) * kr[(i, j)]);
    let l = DMatrix::from_fn(n, n, |j, i| y.weight(i) * kl[(i, j)]);
    l * r
}

#[test]
fn duplicated_pair_matches_merged_weighted_point() {
    let data = random_data(12, 1, 9);
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.push(0);
    let dup = data.select(&idx).unwrap();
    let op = build_operator(&dup, &CostSpec::SquaredEuclidean, 0.05, Variant::Stationary, &tight()).unwrap();
    let with_dup = dense_eigenvalues(&op.dense_matrix());

    let mut w = vec![1.0; n];
    w[0] = 2.0;
    let x = PointCloud::with_unnormalized_weights(1, data.x().coords().to_vec(), w.clone()).unwrap();
    let y = PointCloud::with_unnormalized_weights(1, data.y().coords().to_vec(), w).unwrap();
    let merged = dense_eigenvalues(&weighted_matrix(x, y, 0.05));

    // the duplicate adds a single null direction; the rest of the spectrum is unchanged
    for k in 0..n {
        assert!(
            (with_dup[k] - merged[k]).norm() < 1e-8,
            "{k}: {} vs {}",
            with_dup[k],
            merged[k]
        );
    }
    assert!(with_dup[n].norm() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_positivity_and_radius(n in 3usize..60, d in 1usize..4, eps in 0.02f64..1.0, seed in 0u64..1000) {
        let data = random_data(n, d, seed);
        let op = build_operator(&data, &CostSpec::SquaredEuclidean, eps, Variant::Stationary, &OperatorOptions::default()).unwrap();
        let one = op.apply(&vec![1.0; n]).unwrap();
        prop_assert!(one.iter().all(|v| (v - 1.0).abs() < 1e-8));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        prop_assert!(op.apply(&u).unwrap().iter().all(|v| *v >= 0.0));
        let ev = dense_eigenvalues(&op.dense_matrix());
        prop_assert!(ev.iter().all(|l| l.norm() <= 1.0 + 1e-6));
        prop_assert!((ev[0].re - 1.0).abs() < 1e-6);
    }
}
