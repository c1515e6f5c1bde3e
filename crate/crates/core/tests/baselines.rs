use std::f64::consts::TAU;

use eto_core::baselines::{
    build_ulam, double_blur_error, ot_1d_quantile, single_blur_counterexample, single_blur_error_mc, varsigma,
};
use eto_core::operator::OperatorOptions;
use eto_core::synth::{sample_embedded_ring, sample_torus_shift, EmbeddedRingSpec, TorusShiftSpec};
use eto_core::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ulam_rows_are_stochastic() {
    let data = sample_embedded_ring(&EmbeddedRingSpec::new(2, 0.1), 500, 1).unwrap();
    let u = build_ulam(&data, 0.3).unwrap();
    let m = u.matrix();
    assert!(m.iter().all(|v| *v >= 0.0));
    for r in 0..m.nrows() {
        assert!((m.row(r).sum() - 1.0).abs() < 1e-12);
    }
    assert!(u.cell_count() <= data.len());
    assert!(u.eigenvalues(10).iter().all(|l| l.norm() <= 1.0 + 1e-10));
    for (i, p) in data.x().points().enumerate().take(20) {
        let c = u.partition().cell_of(p).unwrap();
        let centre = &u.centers()[c];
        assert!(
            p.iter().zip(centre).all(|(a, b)| (a - b).abs() <= 0.15 + 1e-12),
            "sample {i}"
        );
    }
    assert!(build_ulam(&data, 0.0).is_err());
}

#[test]
fn ulam_on_shift_by_fifth() {
    let data = sample_torus_shift(&TorusShiftSpec::single(0.2, 0.01), 500, 2).unwrap();
    let ev = build_ulam(&data, 0.1).unwrap().eigenvalues(10);
    let step = TAU / 5.0;
    let close = ev
        .iter()
        .filter(|l| (l.arg() - step * (l.arg() / step).round()).abs() < 0.15)
        .count();
    assert!(close >= 8, "{ev:?}");
}

#[test]
fn quantile_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
    let cells = ot_1d_quantile(&PointCloud::uniform(1, xs.clone()).unwrap()).unwrap();
    let mut order: Vec<usize> = (0..16).collect();
    order.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
    for (rank, &i) in order.iter().enumerate() {
        let c = cells.iter().find(|c| c.index == i).unwrap();
        assert!((c.lo - rank as f64 / 16.0).abs() < 1e-15 && (c.hi - (rank + 1) as f64 / 16.0).abs() < 1e-15);
        assert!((c.hi - c.lo - 1.0 / 16.0).abs() < 1e-15);
    }
    assert!(ot_1d_quantile(&PointCloud::uniform(2, vec![0.0; 4]).unwrap()).is_err());
}

#[test]
fn single_blur_error_is_closed_form() {
    for n in [10, 100, 1000] {
        for eps in [0.05, 0.1, 0.5] {
            let r = single_blur_counterexample(n, eps, 4).unwrap();
            assert!((r.l2_error - (1.0 - 2.0 * varsigma(eps)).abs()).abs() < 1e-12);
            let mc = single_blur_error_mc(n, eps, 4, 20_000).unwrap();
            assert!((mc - r.l2_error).abs() < 1e-9);
        }
    }
    assert!(single_blur_counterexample(200, 1e6, 1).unwrap().l2_error < 1e-6);
}

#[test]
fn double_blur_error_shrinks() {
    let opts = OperatorOptions::default();
    let small: f64 = (0..5).map(|s| double_blur_error(50, 0.1, s, 100, &opts).unwrap()).sum();
    let large: f64 = (0..5)
        .map(|s| double_blur_error(800, 0.1, s, 100, &opts).unwrap())
        .sum();
    assert!(large < small);
    assert!(double_blur_error(100, 1e6, 0, 50, &opts).unwrap() < 0.05);
}

#[test]
fn ulam_eigenvalues_finish_on_sparse_high_dimensional_cells() {
    // at d = 10 almost every sample gets its own cell and the block is permutation-like,
    // where plain Francis QR stalls
    let spec = EmbeddedRingSpec {
        d: 10,
        tau: 0.2,
        sigma: 0.1,
        shift: 0.2,
        geometry_seed: None,
    };
    let data = sample_embedded_ring(&spec, 500, 0).unwrap();
    let u = build_ulam(&data, 2.0 * 0.03f64.sqrt()).unwrap();
    let block = u.square_block();
    let ev = u.eigenvalues(block.nrows());
    assert_eq!(ev.len(), block.nrows());
    let sum: f64 = ev.iter().map(|l| l.re).sum();
    assert!((sum - block.trace()).abs() < 1e-8, "{sum} vs {}", block.trace());
    assert!(ev.iter().all(|l| l.norm() <= 1.0 + 1e-9));
}
