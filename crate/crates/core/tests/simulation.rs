use chgpt_core::exec;
use chgpt_core::filtration::{realized_variance, reconstruct_state, y_bar};
use chgpt_core::model::{
    CoefFn, Intensity, ModelSpec, RandomTimeSpec, RegimeCoefficients, TimeGrid, TimeLaw,
};
use chgpt_core::sde::{compose_driver, simulate_path};
use chgpt_core::stats;

fn constant(mu1: f64, mu2: f64, s1: f64, s2: f64) -> RegimeCoefficients {
    RegimeCoefficients::constant(mu1, mu2, s1, s2)
}

fn taus(spec: &ModelSpec, seed: u64, n: usize) -> Vec<f64> {
    exec::map_indexed(n, |i| simulate_path(spec, seed, i).unwrap().tau().time().unwrap_or(f64::INFINITY))
}

#[test]
fn cox_time_with_constant_intensity_is_exponential() {
    let rate = 1.5;
    let spec = ModelSpec::new(
        TimeGrid::new(1.0, 32).unwrap(),
        constant(0.0, 0.0, 0.2, 0.3),
        RandomTimeSpec::Cox(Intensity::Constant(rate)),
    );
    let t = taus(&spec, 1, 100_000);
    let ks = stats::ks_statistic(&t, |s| 1.0 - (-rate * s).exp());
    assert!(ks < 0.01, "ks = {ks}");
}

#[test]
fn hitting_time_follows_the_reflection_law() {
    let a = 0.5;
    let spec = ModelSpec::new(
        TimeGrid::new(1.0, 4096).unwrap(),
        constant(0.0, 0.0, 0.2, 0.3),
        RandomTimeSpec::HittingTime { level: a },
    );
    let t = taus(&spec, 2, 20_000);
    // P(tau <= s) = 2 (1 - Phi(a / sqrt(s)))
    let ks = stats::ks_statistic(&t, |s| if s.is_finite() { 2.0 * (1.0 - stats::normal_cdf(a / s.sqrt())) } else { 1.0 });
    assert!(ks < 0.02, "ks = {ks}");
}

#[test]
fn independent_uniform_time_has_its_law() {
    let spec = ModelSpec::new(
        TimeGrid::new(1.0, 16).unwrap(),
        constant(0.0, 0.0, 0.2, 0.3),
        RandomTimeSpec::IndependentLaw(TimeLaw::Uniform { lo: 0.0, hi: 2.0 }),
    );
    let t = taus(&spec, 3, 50_000);
    let ks = stats::ks_statistic(&t, |s| (s / 2.0).min(1.0));
    assert!(ks < 0.01, "ks = {ks}");
}

#[test]
fn splitting_a_step_with_equal_regimes_changes_nothing() {
    // with rho = 1 and identical coefficients the post-switch driver is W1
    // again, so a switch inside a step must reproduce the unswitched path
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let coef = constant(0.07, 0.07, 0.3, 0.3);
    let split = ModelSpec::new(grid, coef.clone(), RandomTimeSpec::Deterministic { t0: 0.3737 }).with_rho(1.0);
    let whole = ModelSpec::new(grid, coef, RandomTimeSpec::Deterministic { t0: 5.0 }).with_rho(1.0);
    for i in 0..20 {
        let a = simulate_path(&split, 9, i).unwrap();
        let b = simulate_path(&whole, 9, i).unwrap();
        assert!(a.switch.is_some() && b.switch.is_none());
        for (xa, xb) in a.x.iter().zip(&b.x) {
            assert!((xa - xb).abs() < 1e-12, "{xa} vs {xb}");
        }
    }
}

#[test]
fn prices_stay_positive_under_high_volatility() {
    let spec = ModelSpec::new(
        TimeGrid::new(2.0, 64).unwrap(),
        constant(-0.5, 0.5, 1.5, 2.5),
        RandomTimeSpec::Cox(Intensity::Constant(1.0)),
    )
    .with_rho(-0.7)
    .with_s0(3.0);
    for i in 0..500 {
        let p = simulate_path(&spec, 4, i).unwrap();
        assert!(p.s.iter().all(|&s| s > 0.0 && s.is_finite()));
        assert_eq!(p.s[0], 3.0);
    }
}

#[test]
fn realized_variance_is_unbiased_for_constant_volatility() {
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let spec = ModelSpec::new(grid, constant(0.0, 0.0, 0.3, 0.3), RandomTimeSpec::Deterministic { t0: 0.5 });
    let means = exec::map_indexed(400, |i| {
        let p = simulate_path(&spec, 5, i).unwrap();
        let rv: Vec<f64> = realized_variance(&p.x, &grid, 64).unwrap().into_iter().flatten().collect();
        stats::mean(&rv)
    });
    let m = stats::mean(&means);
    assert!((m / 0.09 - 1.0).abs() < 0.05, "mean realised variance {m}");
}

#[test]
fn normalised_driver_is_the_composed_driver_without_drift() {
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let spec = ModelSpec::new(grid, constant(0.0, 0.0, 0.25, 0.25), RandomTimeSpec::Cox(Intensity::Constant(2.0)))
        .with_rho(0.4);
    for i in 0..50 {
        let p = simulate_path(&spec, 6, i).unwrap();
        let y = y_bar(&spec, &p.x).unwrap();
        let w = compose_driver(&p.w1, &p.w2, p.switch.as_ref(), spec.rho).unwrap();
        for (a, b) in y.iter().zip(&w) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let x = reconstruct_state(&spec, &y).unwrap();
        for (a, b) in x.iter().zip(&p.x) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn state_dependent_volatility_round_trips_through_the_driver() {
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let sig = CoefFn::BoundedSigmoid { lo: 0.1, hi: 0.4, slope: 2.0, center: 0.0 };
    let coef = RegimeCoefficients::new(CoefFn::Constant(0.05), CoefFn::Constant(-0.05), sig.clone(), sig, 1.0).unwrap();
    let spec = ModelSpec::new(grid, coef, RandomTimeSpec::IndependentLaw(TimeLaw::Exponential { rate: 1.0 }));
    for i in 0..20 {
        let p = simulate_path(&spec, 8, i).unwrap();
        let x = reconstruct_state(&spec, &y_bar(&spec, &p.x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&p.x) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
