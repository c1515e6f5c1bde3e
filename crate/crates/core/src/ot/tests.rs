use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::{CostSpec, Error, PointCloud};

fn varsigma(eps: f64) -> f64 {
    1.0 / (1.0 + (1.0 / eps).exp())
}

fn two_point() -> Arc<PointCloud> {
    Arc::new(PointCloud::uniform(1, vec![0.0, 1.0]).unwrap())
}

fn random_cloud(n: usize, d: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::uniform(d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn tight() -> SolverOptions {
    SolverOptions::default().with_tol(1e-13)
}

/// Plain (non-log-domain) Sinkhorn on the Gibbs matrix; returns the plan.
pub(crate) fn plain_sinkhorn_plan(
    a: &PointCloud,
    b: &PointCloud,
    cost: &CostSpec,
    eps: f64,
    iters: usize,
) -> Vec<Vec<f64>> {
    let (n, m) = (a.len(), b.len());
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (-cost.eval(a.point(i), b.point(j)) / eps).exp())
                .collect()
        })
        .collect();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    for _ in 0..iters {
        for i in 0..n {
            let s: f64 = (0..m).map(|j| k[i][j] * v[j]).sum();
            u[i] = a.weight(i) / s;
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| k[i][j] * u[i]).sum();
            v[j] = b.weight(j) / s;
        }
    }
    (0..n)
        .map(|i| (0..m).map(|j| u[i] * k[i][j] * v[j]).collect())
        .collect()
}

fn plan_of(d: &DualPotentials) -> Vec<Vec<f64>> {
    let (s, t) = (d.source(), d.target());
    (0..s.len())
        .map(|i| {
            (0..t.len())
                .map(|j| s.weight(i) * t.weight(j) * d.kernel(s.point(i), t.point(j)).unwrap())
                .collect()
        })
        .collect()
}

fn max_dev(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn two_point_self_transport_matches_closed_form() {
    for eps in [0.05, 0.1, 0.5] {
        let d = solve_self_transport(two_point(), &CostSpec::SquaredEuclidean, eps, &tight()).unwrap();
        assert!(d.is_symmetric());
        assert_eq!(d.alpha(), d.beta());
        let s = varsigma(eps);
        let k = kernel_matrix(&d, 100).unwrap();
        assert!((k[(0, 0)] - 2.0 * (1.0 - s)).abs() < 1e-10);
        assert!((k[(1, 1)] - 2.0 * (1.0 - s)).abs() < 1e-10);
        assert!((k[(0, 1)] - 2.0 * s).abs() < 1e-10);
        assert!((k[(1, 0)] - 2.0 * s).abs() < 1e-10);
    }
}

#[test]
fn two_point_asymmetric_solve_matches_closed_form() {
    let c = two_point();
    let eps = 0.1;
    let d = solve_sinkhorn(c.clone(), c, &CostSpec::SquaredEuclidean, eps, &tight()).unwrap();
    let s = varsigma(eps);
    assert!((d.kernel(&[0.0], &[0.0]).unwrap() - 2.0 * (1.0 - s)).abs() < 1e-10);
    assert!((d.kernel(&[0.0], &[1.0]).unwrap() - 2.0 * s).abs() < 1e-10);
    // gauge: equal weighted means
    let ma: f64 = d.alpha().iter().sum::<f64>() / 2.0;
    let mb: f64 = d.beta().iter().sum::<f64>() / 2.0;
    assert!((ma - mb).abs() < 1e-12);
}

#[test]
fn single_point_is_identity_plan() {
    let c = Arc::new(PointCloud::uniform(2, vec![0.3, -0.7]).unwrap());
    for eps in [1e-3, 1.0] {
        let d = solve_self_transport(c.clone(), &CostSpec::SquaredEuclidean, eps, &tight()).unwrap();
        assert!(d.alpha()[0].abs() < 1e-14);
        let d2 = solve_sinkhorn(c.clone(), c.clone(), &CostSpec::SquaredEuclidean, eps, &tight()).unwrap();
        assert!(d2.alpha()[0].abs() < 1e-14 && d2.beta()[0].abs() < 1e-14);
        assert!((d.kernel(&[0.3, -0.7], &[0.3, -0.7]).unwrap() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn sixteen_points_match_plain_oracle() {
    let c = random_cloud(16, 1, 7);
    let arc = Arc::new(c.clone());
    let cost = CostSpec::SquaredEuclidean;
    let d = solve_sinkhorn(arc.clone(), arc.clone(), &cost, 0.05, &SolverOptions::default()).unwrap();
    let (rs, cs) = d.marginal_residuals();
    assert!(rs < 1e-6 && cs < 1e-6, "residuals {rs} {cs}");
    let d = solve_sinkhorn(arc.clone(), arc, &cost, 0.05, &tight()).unwrap();
    let oracle = plain_sinkhorn_plan(&c, &c, &cost, 0.05, 10_000);
    assert!(max_dev(&plan_of(&d), &oracle) < 1e-8);
}

#[test]
fn log_domain_matches_plain_oracle_across_eps() {
    let cost = CostSpec::SquaredEuclidean;
    for (seed, eps) in [(1u64, 0.01), (2, 0.1), (3, 1.0)] {
        let a = random_cloud(32, 1, seed);
        let b = random_cloud(24, 1, seed + 100);
        let d = solve_sinkhorn(Arc::new(a.clone()), Arc::new(b.clone()), &cost, eps, &tight()).unwrap();
        let oracle = plain_sinkhorn_plan(&a, &b, &cost, eps, 10_000);
        let dev = max_dev(&plan_of(&d), &oracle);
        assert!(dev < 1e-8, "eps {eps}: deviation {dev}");
    }
}

#[test]
fn huge_epsilon_gives_product_plan() {
    let c = Arc::new(random_cloud(30, 2, 5));
    let d = solve_self_transport(c, &CostSpec::SquaredEuclidean, 1e6, &SolverOptions::default()).unwrap();
    let k = kernel_matrix(&d, 100).unwrap();
    assert!(k.iter().all(|v| (v - 1.0).abs() < 1e-3));
}

#[test]
fn equispaced_torus_potential_is_constant() {
    let n = 200;
    let c = Arc::new(PointCloud::uniform(1, (0..n).map(|i| i as f64 / n as f64).collect()).unwrap());
    let eps = 0.05;
    let d = solve_self_transport(c, &CostSpec::unit_torus(1), eps, &tight()).unwrap();
    let (lo, hi) = d
        .alpha()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a)));
    assert!(hi - lo < 0.02 * eps, "spread {}", hi - lo);
}

#[test]
fn random_torus_potential_spread_shrinks_with_n() {
    let eps = 0.05;
    let spread = |n: usize| {
        let mut s = 0.0;
        for seed in 0..3 {
            let c = Arc::new(random_cloud(n, 1, 40 + seed));
            let d = solve_self_transport(
                c,
                &CostSpec::unit_torus(1),
                eps,
                &SolverOptions::default().with_tol(1e-10),
            )
            .unwrap();
            let (lo, hi) = d
                .alpha()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a)));
            s += hi - lo;
        }
        s / 3.0
    };
    let (s1, s2, s3) = (spread(50), spread(200), spread(800));
    assert!(s1 > s2 && s2 > s3, "spreads {s1} {s2} {s3}");
}

#[test]
fn midpoint_query_in_two_point_system() {
    let eps = 0.1;
    let d = solve_self_transport(two_point(), &CostSpec::SquaredEuclidean, eps, &tight()).unwrap();
    let b = d.beta()[0];
    // two-term log-sum-exp, both terms carry cost 0.25
    let hand = -eps * (0.5 * ((b - 0.25) / eps).exp() + 0.5 * ((b - 0.25) / eps).exp()).ln();
    let got = d.source_potential_at(&[0.5]).unwrap();
    assert!((got - hand).abs() < 1e-14);
    assert!((d.kernel(&[0.5], &[0.0]).unwrap() - 1.0).abs() < 1e-12);
    let s = varsigma(eps);
    assert!((d.kernel(&[0.0], &[1.0]).unwrap() - 2.0 * s).abs() < 1e-10);
}

#[test]
fn in_sample_queries_use_stored_potentials() {
    let c = Arc::new(random_cloud(20, 2, 9));
    let d = solve_self_transport(c.clone(), &CostSpec::SquaredEuclidean, 0.1, &SolverOptions::default()).unwrap();
    for i in 0..c.len() {
        assert_eq!(d.source_potential_at(c.point(i)).unwrap(), d.alpha()[i]);
    }
    let k = kernel_matrix(&d, 100).unwrap();
    let (_, row) = d.kernel_to_targets(c.point(3)).unwrap();
    for j in 0..c.len() {
        assert_eq!(row[j], k[(j, 3)]);
        assert_eq!(kernel_evaluate(&d, c.point(3), c.point(j)).unwrap(), k[(j, 3)]);
    }
    // off-sample row: softmax form agrees with direct evaluation
    let x = [0.41, 0.77];
    let (ax, row) = d.kernel_to_targets(&x).unwrap();
    assert!((ax - d.source_potential_at(&x).unwrap()).abs() < 1e-13);
    for j in 0..c.len() {
        let direct = d.kernel(&x, c.point(j)).unwrap();
        assert!((row[j] - direct).abs() <= 1e-12 * direct.max(1.0));
    }
    // extended kernel still integrates to one against the cloud
    let mass: f64 = row.iter().zip(c.weights()).map(|(k, w)| k * w).sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn gauge_shift_leaves_kernel_unchanged() {
    let a = Arc::new(random_cloud(15, 2, 11));
    let b = Arc::new(random_cloud(12, 2, 12));
    let d = solve_sinkhorn(
        a.clone(),
        b.clone(),
        &CostSpec::SquaredEuclidean,
        0.2,
        &SolverOptions::default(),
    )
    .unwrap();
    let s = d.shifted(3.7);
    for i in 0..a.len() {
        for j in 0..b.len() {
            let k0 = d.kernel(a.point(i), b.point(j)).unwrap();
            let k1 = s.kernel(a.point(i), b.point(j)).unwrap();
            assert!((k0 - k1).abs() <= 1e-12 * k0);
        }
    }
}

#[test]
fn warm_start_matches_cold_solve() {
    let a = Arc::new(random_cloud(60, 2, 21));
    let b = Arc::new(random_cloud(50, 2, 22));
    let cost = CostSpec::SquaredEuclidean;
    let opts = SolverOptions::default().with_tol(1e-10);
    let coarse = solve_sinkhorn(a.clone(), b.clone(), &cost, 0.1, &opts).unwrap();
    let warm = solve_sinkhorn_warm(&coarse, 0.03, &opts).unwrap();
    let cold = solve_sinkhorn(a, b, &cost, 0.03, &opts).unwrap();
    for (x, y) in warm.alpha().iter().zip(cold.alpha()) {
        assert!((x - y).abs() < 1e-8);
    }
    let s = solve_self_transport(warm.source_arc().clone(), &cost, 0.1, &opts).unwrap();
    let sw = solve_self_transport_warm(&s, 0.03, &opts).unwrap();
    let sc = solve_self_transport(warm.source_arc().clone(), &cost, 0.03, &opts).unwrap();
    for (x, y) in sw.alpha().iter().zip(sc.alpha()) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn error_paths() {
    let c = two_point();
    let cost = CostSpec::SquaredEuclidean;
    assert!(matches!(
        solve_sinkhorn(c.clone(), c.clone(), &cost, 0.0, &SolverOptions::default()),
        Err(Error::InvalidEpsilon(_))
    ));
    assert!(matches!(
        solve_self_transport(c.clone(), &cost, -1.0, &SolverOptions::default()),
        Err(Error::InvalidEpsilon(_))
    ));
    let big = Arc::new(random_cloud(40, 1, 3));
    let opts = SolverOptions {
        max_iter: 1,
        tol: 1e-14,
        scaling_factor: None,
        ..SolverOptions::default()
    };
    assert!(matches!(
        solve_sinkhorn(big.clone(), big.clone(), &cost, 0.01, &opts),
        Err(Error::NonConvergence { .. })
    ));
    let d = solve_self_transport(c.clone(), &cost, 0.1, &SolverOptions::default()).unwrap();
    assert!(matches!(
        d.kernel(&[0.0, 1.0], &[0.0]),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(matches!(
        kernel_matrix(&d, 1),
        Err(Error::AllocationRefused { n: 2, threshold: 1 })
    ));
    let p2 = Arc::new(PointCloud::uniform(2, vec![0.0, 0.0]).unwrap());
    assert!(solve_sinkhorn(c, p2, &cost, 0.1, &SolverOptions::default()).is_err());
}

#[test]
fn lazy_and_dense_apply_agree() {
    let a = Arc::new(random_cloud(70, 2, 31));
    let b = Arc::new(random_cloud(55, 2, 32));
    let d = Arc::new(solve_sinkhorn(a, b, &CostSpec::SquaredEuclidean, 0.05, &SolverOptions::default()).unwrap());
    let dense = EntropicKernel::new(d.clone(), EvalMode::Dense, 1000).unwrap();
    let lazy = EntropicKernel::lazy(d);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u: Vec<f64> = (0..70).map(|_| rng.random::<f64>() - 0.5).collect();
    let v: Vec<f64> = (0..55).map(|_| rng.random::<f64>() - 0.5).collect();
    let (gd, gl) = (dense.apply(&u).unwrap(), lazy.apply(&u).unwrap());
    assert!(gd.iter().zip(&gl).all(|(x, y)| (x - y).abs() < 1e-12));
    let (ad, al) = (dense.apply_adjoint(&v).unwrap(), lazy.apply_adjoint(&v).unwrap());
    assert!(ad.iter().zip(&al).all(|(x, y)| (x - y).abs() < 1e-12));
    // adjoint identity <G u, v>_target = <u, G* v>_source
    let lhs: f64 = gd.iter().zip(&v).map(|(g, v)| g * v).sum::<f64>() / 55.0;
    let rhs: f64 = u.iter().zip(&ad).map(|(u, a)| u * a).sum::<f64>() / 70.0;
    assert!((lhs - rhs).abs() < 1e-12);
    // mass preservation
    let one = dense.apply(&vec![1.0; 70]).unwrap();
    assert!(one.iter().all(|v| (v - 1.0).abs() < 1e-6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn marginals_and_symmetry(seed in 0u64..10_000, n in 2usize..25, eps in 0.02f64..2.0) {
        let c = Arc::new(random_cloud(n, 2, seed));
        let opts = SolverOptions::default().with_tol(1e-9);
        let d = solve_self_transport(c.clone(), &CostSpec::SquaredEuclidean, eps, &opts).unwrap();
        let k = kernel_matrix(&d, 100).unwrap();
        let w = c.weights();
        for j in 0..n {
            let col: f64 = (0..n).map(|i| w[i] * k[(j, i)]).sum();
            let row: f64 = (0..n).map(|i| w[i] * k[(i, j)]).sum();
            prop_assert!((col - 1.0).abs() < 1e-8);
            prop_assert!((row - 1.0).abs() < 1e-8);
            for i in 0..n {
                prop_assert!(k[(j, i)] > 0.0);
                prop_assert!((k[(j, i)] - k[(i, j)]).abs() < 1e-10);
            }
        }
        let (rs, cs) = d.marginal_residuals();
        prop_assert!(rs.max(cs) <= 1e-9 * 1.01 + 1e-15);
    }
}
