use chgpt_core::exec;
use chgpt_core::filtration::{detect_switch, jump_martingale, realized_variance, DetectorConfig};
use chgpt_core::model::{
    compensator, ChangeTime, Intensity, ModelSpec, RandomTimeSpec, RegimeCoefficients, TimeGrid, TimeLaw,
};
use chgpt_core::sde::simulate_path;
use chgpt_core::stats::{self, MeanEstimate};

fn detection_spec(n: usize) -> ModelSpec {
    ModelSpec::new(
        TimeGrid::new(1.0, n).unwrap(),
        RegimeCoefficients::constant(0.0, 0.0, 0.2, 0.4),
        RandomTimeSpec::Cox(Intensity::Constant(2.0)),
    )
    .with_window(0.2, 0.8)
}

#[test]
fn per_node_classification_is_accurate_away_from_the_switch() {
    let spec = detection_spec(4096);
    let grid = spec.grid;
    let w = 64;
    let collar = 2.0 * w as f64 * grid.dt();
    let (pre2, post2) = (0.04, 0.16);
    let counts = exec::map_indexed(200, |i| {
        let p = simulate_path(&spec, 21, i).unwrap();
        let tau = p.tau().time().unwrap();
        let rv = realized_variance(&p.x, &grid, w).unwrap();
        let (mut right, mut total) = (0usize, 0usize);
        for (k, v) in rv.iter().enumerate() {
            let Some(v) = v else { continue };
            let t = grid.time(k);
            if (t - tau).abs() <= collar {
                continue;
            }
            let says_post = (v - post2).abs() < (v - pre2).abs();
            total += 1;
            right += usize::from(says_post == (t > tau));
        }
        (right, total)
    });
    let right: usize = counts.iter().map(|c| c.0).sum();
    let total: usize = counts.iter().map(|c| c.1).sum();
    let acc = right as f64 / total as f64;
    assert!(acc >= 0.99, "accuracy {acc}");
}

#[test]
fn finer_grids_locate_the_switch_better() {
    let median_error = |n: usize| {
        let spec = detection_spec(n);
        let errs: Vec<f64> = exec::map_indexed(300, |i| {
            let p = simulate_path(&spec, 22, i).unwrap();
            let r = detect_switch(&spec, &p.x, DetectorConfig { window: 64, run_length: 3 }).unwrap();
            (r.tau_hat().unwrap_or(f64::INFINITY) - p.tau().time().unwrap()).abs()
        });
        stats::median(&errs)
    };
    let coarse = median_error(1 << 11);
    let fine = median_error(1 << 13);
    assert!(fine < coarse, "n=2^13: {fine}, n=2^11: {coarse}");
}

#[test]
fn jump_martingale_is_centred_for_a_state_dependent_cox_time() {
    let spec = ModelSpec::new(
        TimeGrid::new(1.0, 256).unwrap(),
        RegimeCoefficients::constant(0.05, 0.0, 0.3, 0.2),
        RandomTimeSpec::Cox(Intensity::Affine { base: 0.8, t_slope: 0.5, w1_slope: 0.4, x_slope: 0.0 }),
    );
    let m_t = exec::map_indexed(40_000, |i| {
        let p = simulate_path(&spec, 23, i).unwrap();
        *jump_martingale(&spec, &p).unwrap().last().unwrap()
    });
    let est = MeanEstimate::from_samples(&m_t);
    assert!(est.covers(0.0, 3.0), "{est:?}");
}

#[test]
fn uniform_compensator_beyond_the_horizon_is_log_half() {
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let spec = RandomTimeSpec::IndependentLaw(TimeLaw::Uniform { lo: 0.0, hi: 2.0 });
    let zeros = vec![0.0; grid.len()];
    let a = compensator(&spec, ChangeTime::BeyondHorizon, &grid, &zeros, &zeros).unwrap();
    // m_T = -A_T = ln(1 - F(1)) = -ln 2
    assert!((-a[grid.n_steps()] + std::f64::consts::LN_2).abs() < 1e-4, "{}", a[grid.n_steps()]);
}

#[test]
fn constant_intensity_compensator_is_linear_until_tau() {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let spec = RandomTimeSpec::Cox(Intensity::Constant(3.0));
    let zeros = vec![0.0; grid.len()];
    let a = compensator(&spec, ChangeTime::Within(0.405), &grid, &zeros, &zeros).unwrap();
    for (k, ak) in a.iter().enumerate() {
        let t = grid.time(k).min(0.405);
        assert!((ak - 3.0 * t).abs() < 1e-12, "A({}) = {ak}", grid.time(k));
    }
}

#[test]
fn compensator_is_refused_for_hitting_and_deterministic_times() {
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let zeros = vec![0.0; grid.len()];
    for spec in [RandomTimeSpec::HittingTime { level: 0.3 }, RandomTimeSpec::Deterministic { t0: 0.5 }] {
        assert!(compensator(&spec, ChangeTime::Within(0.5), &grid, &zeros, &zeros).is_err());
    }
}
