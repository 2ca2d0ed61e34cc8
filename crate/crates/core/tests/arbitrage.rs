use chgpt_core::arbitrage::{deflated_price_test, deflator, girsanov_driver_mean, na1_test, risk_path, Na1Verdict};
use chgpt_core::exec;
use chgpt_core::model::{FiltrationTag, Intensity, ModelSpec, RandomTimeSpec, RegimeCoefficients, TimeGrid, TimeLaw};
use chgpt_core::sde::simulate_path;
use chgpt_core::stats::MeanEstimate;
use chgpt_core::Error;

fn immersion(mu1: f64, mu2: f64) -> ModelSpec {
    ModelSpec::new(
        TimeGrid::new(1.0, 64).unwrap(),
        RegimeCoefficients::constant(mu1, mu2, 0.2, 0.4),
        RandomTimeSpec::IndependentLaw(TimeLaw::Exponential { rate: 1.0 }),
    )
    .with_rho(0.3)
}

#[test]
fn log_deflator_has_mean_minus_half_energy() {
    // mu / sigma = 0.5 in both regimes
    let spec = immersion(0.1, 0.2);
    let logs = exec::map_indexed(50_000, |i| {
        let p = simulate_path(&spec, 31, i).unwrap();
        deflator(&spec, &p, FiltrationTag::G).unwrap().last().unwrap().ln()
    });
    let est = MeanEstimate::from_samples(&logs);
    assert!(est.covers(-0.125, 3.0), "{est:?}");
}

#[test]
fn deflated_price_is_a_martingale_under_immersion() {
    let spec = immersion(0.05, 0.12);
    let r = deflated_price_test(&spec, FiltrationTag::G, 32, 20_000, &[0, 16, 32, 48, 64], 0.99).unwrap();
    assert!(r.martingale.passed, "{:?}", r.martingale);
    assert!(r.deflator_unbiased, "{:?}", r.terminal_deflator);
    // supermartingale side: never significantly above one
    let z = r.terminal_deflator;
    assert!(z.mean <= 1.0 + 3.0 * z.se);
}

#[test]
fn girsanov_driver_is_centred_under_the_deflated_measure() {
    let spec = immersion(0.1, -0.1);
    let est = girsanov_driver_mean(&spec, FiltrationTag::G, 33, 20_000).unwrap();
    assert!(est.covers(0.0, 3.0), "{est:?}");
}

#[test]
fn initial_enlargement_by_an_independent_time_adds_no_drift() {
    let spec = immersion(0.05, 0.1);
    for i in 0..50 {
        let p = simulate_path(&spec, 34, i).unwrap();
        let g = risk_path(&spec, &p, FiltrationTag::G).unwrap();
        let gt = risk_path(&spec, &p, FiltrationTag::GTau).unwrap();
        if gt.excluded {
            continue;
        }
        for (a, b) in g.brownian().iter().zip(&gt.brownian()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in g.lambda.iter().zip(&gt.lambda) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn immersion_scenarios_are_na1_stable() {
    let spec = ModelSpec::new(
        TimeGrid::new(1.0, 256).unwrap(),
        RegimeCoefficients::constant(0.05, 0.1, 0.2, 0.3),
        RandomTimeSpec::Cox(Intensity::Constant(1.0)),
    );
    for tag in [FiltrationTag::G, FiltrationTag::Gx] {
        assert_eq!(na1_test(&spec, tag, 35, 300).unwrap().verdict, Na1Verdict::Stable);
    }
}

#[test]
fn hitting_time_known_in_advance_diverges_and_refuses_a_deflator() {
    let spec = ModelSpec::new(
        TimeGrid::new(1.0, 4096).unwrap(),
        RegimeCoefficients::constant(0.0, 0.0, 0.2, 0.3),
        RandomTimeSpec::HittingTime { level: 0.15 },
    );
    let r = na1_test(&spec, FiltrationTag::GTau, 36, 500).unwrap();
    assert_eq!(r.verdict, Na1Verdict::Diverging, "{r:?}");
    let p = (0..).map(|i| simulate_path(&spec, 36, i).unwrap()).find(|p| p.switch.is_some()).unwrap();
    assert!(matches!(deflator(&spec, &p, FiltrationTag::GTau), Err(Error::ArbitrageDetected(_))));
}

#[test]
fn martingale_test_needs_enough_paths() {
    let spec = immersion(0.05, 0.1);
    let r = deflated_price_test(&spec, FiltrationTag::G, 1, 999, &[0, 64], 0.99);
    assert!(matches!(r, Err(Error::TooFewPaths { .. })));
}
