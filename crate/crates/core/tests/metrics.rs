use eto_core::data::TrajectoryMeta;
use eto_core::metrics::{
    l2_distance_grid, l2_distance_mc, mean_ci95, phase_of_subdominant, true_vs_regularized, uniform_torus_pairs,
    RegularizedTorusKernel,
};
use eto_core::operator::OperatorOptions;
use eto_core::spectral::{top_eigenpairs, SpectralOptions};
use eto_core::synth::{
    sample_rotating_trajectory, sample_torus_shift, true_kernel_torus, RotatingShiftSpec, TorusShiftSpec,
};
use eto_core::{build_operator, CostSpec, TransitionData, Variant};

#[test]
fn regularization_bias_shrinks_with_epsilon() {
    let spec = TorusShiftSpec::mixture(0.05);
    let v: Vec<f64> = [0.1, 0.03, 0.01, 0.003]
        .iter()
        .map(|e| true_vs_regularized(&spec, *e, 256).unwrap())
        .collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
}

#[test]
fn grid_converges_in_resolution() {
    for sigma in [0.02, 0.05, 0.1] {
        let spec = TorusShiftSpec::mixture(sigma);
        let a = true_vs_regularized(&spec, 0.01, 256).unwrap();
        let b = true_vs_regularized(&spec, 0.01, 512).unwrap();
        assert!((a - b).abs() < 1e-3, "σ={sigma}: {a} vs {b}");
    }
}

#[test]
fn monte_carlo_agrees_with_grid() {
    let spec = TorusShiftSpec::mixture(0.05);
    let reg = RegularizedTorusKernel::new(&spec, 0.01, 512).unwrap();
    let f = |x: &[f64], y: &[f64]| true_kernel_torus(&spec, x, y);
    let g = |x: &[f64], y: &[f64]| reg.eval(x, y);
    let grid = l2_distance_grid(
        |x, y| true_kernel_torus(&spec, &[x], &[y]),
        |x, y| reg.at_delta(y - x),
        512,
    )
    .unwrap();
    let mc = l2_distance_mc(f, g, uniform_torus_pairs(1), 100_000, 3).unwrap();
    assert!(
        (mc.value - grid).abs() < 3.0 * mc.stderr,
        "{} ± {} vs {grid}",
        mc.value,
        mc.stderr
    );

    // unbiasedness probe over independent seeds
    let runs: Vec<_> = (0..50)
        .map(|s| l2_distance_mc(f, g, uniform_torus_pairs(1), 4000, 100 + s).unwrap())
        .collect();
    let vals: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let (mean, _) = mean_ci95(&vals);
    let combined = (runs.iter().map(|r| r.stderr * r.stderr).sum::<f64>()).sqrt() / runs.len() as f64;
    assert!(
        (mean - grid).abs() < 2.0 * combined + 2e-3 * grid,
        "{mean} vs {grid} (se {combined})"
    );
}

fn shift_phase(lag: usize) -> f64 {
    let states = sample_rotating_trajectory(
        &RotatingShiftSpec {
            shift: 0.2,
            sigma: 0.01,
        },
        608,
        2,
    )
    .unwrap();
    let data = TransitionData::from_trajectory(&states, TrajectoryMeta { t0: 0, stride: 1, lag }).unwrap();
    let data = data.select(&(0..600).collect::<Vec<_>>()).unwrap();
    let op = build_operator(
        &data,
        &CostSpec::unit_torus(1),
        0.02,
        Variant::Stationary,
        &OperatorOptions::default(),
    )
    .unwrap();
    phase_of_subdominant(&top_eigenpairs(&op, 3, &SpectralOptions::default()).unwrap(), lag, 1e-3).unwrap()
}

#[test]
fn subdominant_phase_of_shift() {
    let target = std::f64::consts::TAU * 0.2;
    let one = shift_phase(1);
    assert!((one / std::f64::consts::TAU - 0.2).abs() < 0.02);
    // two steps of 0.2 rotate by 0.4 turns, still on the principal branch
    let two = shift_phase(2);
    assert!((two - one).abs() < 0.05, "{two} vs {one} (target {target})");
}

#[test]
fn identity_dynamics_has_zero_phase() {
    let data = sample_torus_shift(&TorusShiftSpec::single(0.0, 0.0), 300, 3).unwrap();
    let op = build_operator(
        &data,
        &CostSpec::unit_torus(1),
        0.01,
        Variant::Stationary,
        &OperatorOptions::default(),
    )
    .unwrap();
    let s = top_eigenpairs(&op, 3, &SpectralOptions::default()).unwrap();
    assert!(phase_of_subdominant(&s, 1, 1e-3).unwrap() < 1e-8);
}
