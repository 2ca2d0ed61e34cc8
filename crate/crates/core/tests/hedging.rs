use chgpt_core::arbitrage::deflator;
use chgpt_core::exec;
use chgpt_core::hedging::{fit_hedge, replicate, rmse_ladder, Claim, HedgeConfig};
use chgpt_core::model::{FiltrationTag, Intensity, ModelSpec, RandomTimeSpec, RegimeCoefficients, TimeGrid};
use chgpt_core::sde::simulate_path;
use chgpt_core::stats;

fn spec(mu: f64) -> ModelSpec {
    ModelSpec::new(
        TimeGrid::new(1.0, 32).unwrap(),
        RegimeCoefficients::constant(mu, mu, 0.2, 0.2),
        RandomTimeSpec::Cox(Intensity::Constant(1.0)),
    )
}

fn cfg() -> HedgeConfig {
    HedgeConfig { use_jump: false, ..HedgeConfig::new(FiltrationTag::G) }
}

#[test]
fn constant_claim_needs_no_trading() {
    let s = spec(0.05);
    let fit = fit_hedge(&s, Claim::Constant { value: 2.5 }, cfg(), 41, 2000).unwrap();
    assert!((fit.v0[0] - 2.5).abs() < 1e-10, "{:?}", fit.v0);
    let r = replicate(&s, &fit, 41, 500).unwrap();
    assert!(r.rmse < 1e-10, "{r:?}");
}

#[test]
fn asset_is_replicated_by_holding_one_unit() {
    let s = spec(0.05);
    let fit = fit_hedge(&s, Claim::Asset, cfg(), 42, 4000).unwrap();
    assert!((fit.v0[0] - 1.0).abs() < 0.01, "{:?}", fit.v0);
    let h: Vec<f64> = (0..32)
        .flat_map(|k| [-0.3, 0.0, 0.3].map(|x| (fit.model.position(k, 0, x).1 - 1.0).abs()))
        .collect();
    assert!(stats::mean(&h) < 0.05, "mean |h - 1| = {}", stats::mean(&h));
    // wealth S_0 + sum dS is S_T exactly; what is left is the polynomial
    // fit of S as a function of the state
    let r = replicate(&s, &fit, 42, 1000).unwrap();
    assert!(r.rmse < 1e-3, "{r:?}");
}

#[test]
fn driftless_state_digital_is_worth_one_half() {
    let s = spec(0.0);
    let fit = fit_hedge(&s, Claim::DigitalState { level: 0.0 }, cfg(), 43, 20_000).unwrap();
    assert!((fit.v0[0] - 0.5).abs() < 0.02, "{:?}", fit.v0);
}

#[test]
fn initial_value_matches_the_deflated_expectation() {
    let s = spec(0.08);
    let claim = Claim::Call { strike: 1.0 };
    let n = 20_000;
    let fit = fit_hedge(&s, claim, cfg(), 44, n).unwrap();
    let rows = exec::map_indexed(n, |i| {
        let p = simulate_path(&s, 44, i).unwrap();
        let z = *deflator(&s, &p, FiltrationTag::G).unwrap().last().unwrap();
        (z, claim.payoff(&p))
    });
    let z: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let h: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let est = stats::weighted_mean(&h, &z);
    assert!((fit.v0[0] - est.mean).abs() <= 3.0 * est.se.max(1e-4), "v0 {} vs {est:?}", fit.v0[0]);
}

#[test]
fn rmse_does_not_grow_with_more_training_paths() {
    let s = spec(0.05);
    let ladder = rmse_ladder(&s, Claim::Call { strike: 1.0 }, cfg(), 45, &[500, 2000, 8000], 2000).unwrap();
    for w in ladder.windows(2) {
        assert!(w[1].1 <= 1.1 * w[0].1, "{ladder:?}");
    }
}

#[test]
fn replication_errors_are_reported_out_of_sample() {
    let s = spec(0.05);
    let fit = fit_hedge(&s, Claim::Call { strike: 1.0 }, cfg(), 46, 1000).unwrap();
    let r = replicate(&s, &fit, 46, 500).unwrap();
    assert!(!r.in_sample);
    assert!(r.rmse > 0.0 && r.rmse < 0.1, "{r:?}");
    assert!(r.mean_error.abs() < 0.05);
}
