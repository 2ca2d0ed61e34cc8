use crate::error::{Error, Result};
use crate::model::coefficients::Regime;
use crate::model::grid::TimeGrid;
use crate::model::path::PathBundle;
use crate::model::random_time::RandomTimeSpec;
use crate::model::scenario::{FiltrationTag, ModelSpec};
use crate::sde::step_pieces;

/// Market price of risk along one path, on the regime pieces of each step.
#[derive(Debug, Clone, Default)]
pub struct RiskPath {
    pub t0: Vec<f64>,
    pub h: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Increments of the Brownian motion of the chosen filtration.
    pub db: Vec<f64>,
    /// Time at which the market price of risk blows up, if any.
    pub singular_time: Option<f64>,
    /// The path carries no usable information for this filtration (the
    /// change point lies beyond the horizon but the filtration knows it).
    pub excluded: bool,
}

impl RiskPath {
    /// `int_0^c lambda^2 dt`, integrating the piecewise-constant market
    /// price of risk with a partial last piece.
    pub fn energy_until(&self, c: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.t0.len() {
            let (a, h) = (self.t0[i], self.h[i]);
            if a >= c {
                break;
            }
            let l2 = self.lambda[i] * self.lambda[i];
            acc += l2 * h.min(c - a);
        }
        acc
    }

    /// Cumulative Brownian motion of the filtration on piece ends.
    pub fn brownian(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.db.len() + 1);
        out.push(0.0);
        for (i, d) in self.db.iter().enumerate() {
            out.push(out[i] + d);
        }
        out
    }
}

/// Drift of `W1` in the filtration that knows a hitting time `tau` of
/// `level` from the start: before tau the driver is a three-dimensional
/// Bessel bridge towards the level, so
/// `theta_k = (a - w_k) / (tau - t_k) - 1 / (a - w_k)` for `t_k < tau` and
/// zero afterwards.
pub fn initial_enlargement_drift(tau: f64, w1: &[f64], level: f64, grid: &TimeGrid) -> Result<Vec<f64>> {
    if w1.len() != grid.len() {
        return Err(Error::InconsistentData(format!("w1 has {} nodes, grid has {}", w1.len(), grid.len())));
    }
    w1.iter()
        .enumerate()
        .map(|(k, &w)| {
            let t = grid.time(k);
            if t >= tau {
                return Ok(0.0);
            }
            let gap = level - w;
            if gap <= 0.0 {
                return Err(Error::InconsistentData(format!("driver at {w} reaches the level {level} before tau at node {k}")));
            }
            Ok(gap / (tau - t) - 1.0 / gap)
        })
        .collect()
}

/// Rejects filtration/construction pairs without a closed-form market price
/// of risk.
pub fn check_support(spec: &ModelSpec, tag: FiltrationTag) -> Result<()> {
    match tag {
        FiltrationTag::G | FiltrationTag::Gx => Ok(()),
        FiltrationTag::Fx => {
            let lattice = spec.lattice();
            let c = &spec.coefficients;
            if c.identical_vol(&lattice) && !c.identical_drift(&lattice) {
                Err(Error::UnsupportedScenario(
                    "FX with identical volatility but distinct drifts needs a filtering estimate".into(),
                ))
            } else {
                Ok(())
            }
        }
        FiltrationTag::GTau | FiltrationTag::GxTau => match spec.tau {
            RandomTimeSpec::Cox(_) => Err(Error::UnsupportedScenario(format!(
                "{tag} with a Cox change point has no closed-form information drift"
            ))),
            _ => Ok(()),
        },
    }
}

/// Market price of risk `lambda = mu / sigma + theta` on every regime piece,
/// where `theta` is the information drift of the driver. `theta` vanishes
/// except for a hitting time known in advance, where the driver before tau
/// is a three-dimensional Bessel bridge towards the level:
/// `theta = (a - w) / (tau - t) - 1 / (a - w)`.
pub fn risk_path(spec: &ModelSpec, path: &PathBundle, tag: FiltrationTag) -> Result<RiskPath> {
    check_support(spec, tag)?;
    let c = &spec.coefficients;
    let grid = &spec.grid;
    let n = path.n_steps();
    let mut out = RiskPath {
        t0: Vec::with_capacity(n + 1),
        h: Vec::with_capacity(n + 1),
        lambda: Vec::with_capacity(n + 1),
        db: Vec::with_capacity(n + 1),
        singular_time: None,
        excluded: false,
    };
    let bridge = match (tag.knows_tau(), &spec.tau) {
        (true, RandomTimeSpec::HittingTime { level }) => match path.tau().time() {
            Some(tau) => {
                out.singular_time = Some(tau);
                Some((*level, tau))
            }
            None => {
                out.excluded = true;
                None
            }
        },
        _ => None,
    };
    let theta = match bridge {
        Some((level, tau)) => {
            // under GX_tau the driver before tau is read off the state path
            let w1 = if tag == FiltrationTag::GxTau {
                let last = path.switch.map_or(n, |sp| sp.step);
                let mut w = Vec::with_capacity(n + 1);
                w.push(0.0);
                for k in 0..last {
                    let t = grid.time(k);
                    let xk = path.x[k];
                    let dx = path.x[k + 1] - xk - c.mu1.eval(t, xk) * grid.step_len(k);
                    w.push(w[k] + dx / c.sigma1.eval(t, xk));
                }
                w.extend_from_slice(&path.w1[last + 1..]);
                w
            } else {
                path.w1.clone()
            };
            Some(initial_enlargement_drift(tau, &w1, level, grid)?)
        }
        None => None,
    };
    for k in 0..n {
        for pc in step_pieces(spec, path, k).as_slice() {
            let mut lambda = c.drift(pc.regime, pc.t0, pc.x0) / c.vol(pc.regime, pc.t0, pc.x0);
            let th = match (&theta, pc.regime) {
                (Some(th), Regime::Pre) => th[k],
                _ => 0.0,
            };
            lambda += th;
            if !lambda.is_finite() {
                return Err(Error::NumericalOverflow { path: path.index, step: k });
            }
            out.t0.push(pc.t0);
            out.h.push(pc.h);
            out.lambda.push(lambda);
            out.db.push(pc.dw - th * pc.h);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coefficients::RegimeCoefficients;
    use crate::model::grid::TimeGrid;
    use crate::model::random_time::{Intensity, TimeLaw};
    use crate::sde::simulate_path;
    use approx::assert_relative_eq;

    fn spec(tau: RandomTimeSpec) -> ModelSpec {
        ModelSpec::new(TimeGrid::new(1.0, 128).unwrap(), RegimeCoefficients::constant(0.1, 0.3, 0.2, 0.4), tau)
    }

    #[test]
    fn immersion_gives_regime_sharpe_ratio() {
        let s = spec(RandomTimeSpec::Deterministic { t0: 0.25 });
        let p = simulate_path(&s, 0, 0).unwrap();
        let r = risk_path(&s, &p, FiltrationTag::G).unwrap();
        // tau on a node: the switch step carries an empty post-switch piece
        assert_eq!(r.lambda.len(), 129);
        assert_eq!(r.h[32], 0.0);
        assert_relative_eq!(r.lambda[0], 0.5);
        assert_relative_eq!(r.lambda[128], 0.75);
        assert_relative_eq!(r.energy_until(1.0), 0.25 * 0.25 + 0.75 * 0.5625, epsilon = 1e-12);
    }

    #[test]
    fn independent_time_brownian_unchanged_by_knowing_tau() {
        let s = spec(RandomTimeSpec::IndependentLaw(TimeLaw::Exponential { rate: 1.0 }));
        for i in 0..10 {
            let p = simulate_path(&s, 2, i).unwrap();
            let b = risk_path(&s, &p, FiltrationTag::G).unwrap().brownian();
            let bt = risk_path(&s, &p, FiltrationTag::GTau).unwrap().brownian();
            let gap = b.iter().zip(&bt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-12);
        }
    }

    #[test]
    fn bridge_drift_arithmetic() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        // nodes 0, .25, .5, .75, 1 with tau = .75
        let th = initial_enlargement_drift(0.75, &[0.0, 0.2, 0.5, 0.9, 1.3], 1.0, &g).unwrap();
        assert_relative_eq!(th[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(th[1], 0.8 / 0.5 - 1.0 / 0.8, epsilon = 1e-12);
        assert_eq!(&th[3..], &[0.0, 0.0]);
        let g10 = TimeGrid::new(1.0, 10).unwrap();
        let mut w = vec![0.0; 11];
        w[9] = 0.8;
        let th = initial_enlargement_drift(1.0, &w, 1.0, &g10).unwrap();
        assert_relative_eq!(th[9], -3.0, epsilon = 1e-9);
    }

    #[test]
    fn bridge_drift_rejects_level_reached_early() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert!(initial_enlargement_drift(0.75, &[0.0, 1.2, 0.5, 0.9, 1.3], 1.0, &g).is_err());
    }

    #[test]
    fn constant_drift_identical_vol_fx() {
        let mut s = spec(RandomTimeSpec::Cox(Intensity::Constant(1.0)));
        s.coefficients = RegimeCoefficients::constant(0.06, 0.06, 0.3, 0.3);
        let p = simulate_path(&s, 0, 0).unwrap();
        let r = risk_path(&s, &p, FiltrationTag::Fx).unwrap();
        assert!(r.lambda.iter().all(|&l| (l - 0.2).abs() < 1e-12));
    }

    #[test]
    fn cox_with_known_tau_unsupported() {
        let s = spec(RandomTimeSpec::Cox(Intensity::Constant(1.0)));
        let p = simulate_path(&s, 0, 0).unwrap();
        assert!(matches!(risk_path(&s, &p, FiltrationTag::GTau), Err(Error::UnsupportedScenario(_))));
    }

    #[test]
    fn fx_identical_vol_distinct_drift_unsupported() {
        let mut s = spec(RandomTimeSpec::Deterministic { t0: 0.5 });
        s.coefficients = RegimeCoefficients::constant(0.1, 0.2, 0.3, 0.3);
        assert!(check_support(&s, FiltrationTag::Fx).is_err());
        s.coefficients = RegimeCoefficients::constant(0.1, 0.1, 0.3, 0.3);
        assert!(check_support(&s, FiltrationTag::Fx).is_ok());
    }

    #[test]
    fn hitting_time_known_in_advance_is_singular() {
        let s = spec(RandomTimeSpec::HittingTime { level: 0.2 });
        for i in 0..20 {
            let p = simulate_path(&s, 1, i).unwrap();
            let g = risk_path(&s, &p, FiltrationTag::GTau).unwrap();
            let gx = risk_path(&s, &p, FiltrationTag::GxTau).unwrap();
            assert_eq!(g.singular_time, p.tau().time());
            assert_eq!(g.excluded, p.switch.is_none());
            for (a, b) in g.lambda.iter().zip(&gx.lambda) {
                assert_relative_eq!(*a, *b, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }
}
