use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::grid::TimeGrid;

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type IntensityFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Law of a change point independent of the driving Brownian motions.
#[derive(Clone)]
pub enum TimeLaw {
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    Custom { name: String, cdf: TimeFn, density: TimeFn },
}

impl TimeLaw {
    pub fn custom(
        name: impl Into<String>,
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TimeLaw::Custom { name: name.into(), cdf: Arc::new(cdf), density: Arc::new(density) }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            TimeLaw::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            TimeLaw::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            TimeLaw::Custom { cdf, .. } => cdf(t),
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        match self {
            TimeLaw::Uniform { lo, hi } => {
                if t >= *lo && t <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            TimeLaw::Exponential { rate } => {
                if t < 0.0 {
                    0.0
                } else {
                    rate * (-rate * t).exp()
                }
            }
            TimeLaw::Custom { density, .. } => density(t),
        }
    }

    /// Generalised inverse `inf { t >= 0 : F(t) >= u }`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            TimeLaw::Uniform { lo, hi } => lo + u * (hi - lo),
            TimeLaw::Exponential { rate } => -(-u).ln_1p() / rate,
            TimeLaw::Custom { cdf, .. } => {
                let mut hi = 1.0;
                while cdf(hi) < u {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return f64::INFINITY;
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if cdf(mid) >= u {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= 1e-15 * hi.max(1.0) {
                        break;
                    }
                }
                hi
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TimeLaw::Uniform { lo, hi } => format!("uniform({lo:?},{hi:?})"),
            TimeLaw::Exponential { rate } => format!("exponential({rate:?})"),
            TimeLaw::Custom { name, .. } => format!("custom({name})"),
        }
    }
}

/// Intensity `lambda(t, w1, x) >= 0` of a doubly stochastic change point.
#[derive(Clone)]
pub enum Intensity {
    Constant(f64),
    /// `max(0, base + t_slope t + w1_slope w1 + x_slope x)`
    Affine { base: f64, t_slope: f64, w1_slope: f64, x_slope: f64 },
    Custom { name: String, f: IntensityFn },
}

impl Intensity {
    #[inline]
    pub fn eval(&self, t: f64, w1: f64, x: f64) -> f64 {
        match self {
            Intensity::Constant(c) => *c,
            Intensity::Affine { base, t_slope, w1_slope, x_slope } => {
                (base + t_slope * t + w1_slope * w1 + x_slope * x).max(0.0)
            }
            Intensity::Custom { f, .. } => f(t, w1, x),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Intensity::Constant(c) => format!("constant({c:?})"),
            Intensity::Affine { base, t_slope, w1_slope, x_slope } => {
                format!("affine({base:?},{t_slope:?},{w1_slope:?},{x_slope:?})")
            }
            Intensity::Custom { name, .. } => format!("custom({name})"),
        }
    }
}

/// Supported constructions of the random change point.
#[derive(Clone)]
pub enum RandomTimeSpec {
    Deterministic { t0: f64 },
    IndependentLaw(TimeLaw),
    Cox(Intensity),
    /// First passage of the driver `W1` through `level > 0`.
    HittingTime { level: f64 },
}

impl fmt::Debug for RandomTimeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// A sampled change point: either a time in `(0, T]` or the marker for
/// "no switch on the horizon".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChangeTime {
    Within(f64),
    BeyondHorizon,
}

impl ChangeTime {
    pub fn time(self) -> Option<f64> {
        match self {
            ChangeTime::Within(t) => Some(t),
            ChangeTime::BeyondHorizon => None,
        }
    }

    /// `1{t > tau}`.
    pub fn switched_by(self, t: f64) -> bool {
        matches!(self, ChangeTime::Within(tau) if t > tau)
    }

    /// `1{tau <= t}`.
    pub fn occurred_by(self, t: f64) -> bool {
        matches!(self, ChangeTime::Within(tau) if tau <= t)
    }
}

const PROBES: usize = 257;

impl RandomTimeSpec {
    pub fn describe(&self) -> String {
        match self {
            RandomTimeSpec::Deterministic { t0 } => format!("deterministic({t0:?})"),
            RandomTimeSpec::IndependentLaw(l) => format!("independent({})", l.describe()),
            RandomTimeSpec::Cox(i) => format!("cox({})", i.describe()),
            RandomTimeSpec::HittingTime { level } => format!("hitting({level:?})"),
        }
    }

    /// Checks the invariants of each construction on a probe lattice over
    /// `[0, horizon]`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let probes = || (0..PROBES).map(move |i| horizon * i as f64 / (PROBES - 1) as f64);
        match self {
            RandomTimeSpec::Deterministic { t0 } => {
                if !(*t0 > 0.0) || t0.is_nan() {
                    return Err(Error::invalid("tau.t0", format!("must be positive, got {t0}")));
                }
            }
            RandomTimeSpec::IndependentLaw(law) => {
                if let TimeLaw::Uniform { lo, hi } = law {
                    if !(*lo >= 0.0 && hi > lo) {
                        return Err(Error::invalid("tau.law", "uniform law needs 0 <= lo < hi"));
                    }
                }
                if let TimeLaw::Exponential { rate } = law {
                    if !(*rate > 0.0 && rate.is_finite()) {
                        return Err(Error::invalid("tau.law", "exponential rate must be positive"));
                    }
                }
                if law.cdf(0.0).abs() > 1e-12 {
                    return Err(Error::invalid("tau.law", "cdf(0) must be 0"));
                }
                let ts: Vec<f64> = probes().collect();
                let mut prev = 0.0;
                for &t in &ts {
                    let f = law.cdf(t);
                    let d = law.density(t);
                    if f < prev - 1e-15 || !(0.0..=1.0).contains(&f) {
                        return Err(Error::invalid("tau.law", format!("cdf not a nondecreasing probability at t={t}")));
                    }
                    if d < 0.0 || !d.is_finite() {
                        return Err(Error::invalid("tau.law", format!("density negative at t={t}")));
                    }
                    prev = f;
                }
                // density must integrate to the cdf; refine each probe cell to
                // keep the quadrature error well under the tolerance
                let mut acc = 0.0;
                let sub = 64;
                for w in ts.windows(2) {
                    let h = (w[1] - w[0]) / sub as f64;
                    for j in 0..sub {
                        let a = w[0] + j as f64 * h;
                        acc += 0.5 * h * (law.density(a) + law.density(a + h));
                    }
                    let gap = (acc - law.cdf(w[1])).abs();
                    if gap > 1e-6 {
                        return Err(Error::invalid(
                            "tau.law",
                            format!("density inconsistent with cdf at t={} (gap {gap:.3e})", w[1]),
                        ));
                    }
                }
            }
            RandomTimeSpec::Cox(intensity) => {
                for t in probes() {
                    for w in [-3.0, -1.0, 0.0, 1.0, 3.0] {
                        for x in [-3.0, -1.0, 0.0, 1.0, 3.0] {
                            let l = intensity.eval(t, w, x);
                            if !(l >= 0.0 && l.is_finite()) {
                                return Err(Error::invalid("tau.intensity", format!("negative intensity at t={t}")));
                            }
                        }
                    }
                }
            }
            RandomTimeSpec::HittingTime { level } => {
                if !(*level > 0.0 && level.is_finite()) {
                    return Err(Error::invalid("tau.level", format!("must be positive, got {level}")));
                }
            }
        }
        Ok(())
    }

    /// Whether the driving paths are needed before the change point can be
    /// drawn.
    pub fn depends_on_paths(&self) -> bool {
        matches!(self, RandomTimeSpec::Cox(_) | RandomTimeSpec::HittingTime { .. })
    }

    /// Immersion holds between the Brownian filtration and its progressive
    /// enlargement by tau for every supported construction: independent and
    /// deterministic times trivially, Cox times by construction, hitting
    /// times because they are already stopping times.
    pub fn immersion_holds(&self) -> bool {
        true
    }
}

/// Draws the change point from a uniform `u` in (0, 1).
///
/// `w1` and `x` are the driver and the pre-switch state on the grid; they are
/// ignored by the deterministic and independent constructions. The Cox time
/// inverts the trapezoid-accumulated intensity at `-ln(1-u)`; the hitting
/// time inverts the cumulative Brownian-bridge crossing hazard
/// `-ln(1 - p_k)` with `p_k = exp(-2 (a - w_k)(a - w_{k+1}) / dt)` the
/// probability that the bridge over step `k` touches the level.
pub fn sample_tau(spec: &RandomTimeSpec, w1: &[f64], x: &[f64], grid: &TimeGrid, u: f64) -> Result<ChangeTime> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidUniform(u));
    }
    let horizon = grid.horizon();
    match spec {
        RandomTimeSpec::Deterministic { t0 } => Ok(within(*t0, horizon)),
        RandomTimeSpec::IndependentLaw(law) => {
            if law.cdf(horizon) < u {
                return Ok(ChangeTime::BeyondHorizon);
            }
            Ok(within(law.inverse_cdf(u), horizon))
        }
        RandomTimeSpec::Cox(intensity) => {
            check_len(w1, grid, "w1")?;
            check_len(x, grid, "x")?;
            let target = -(-u).ln_1p();
            let mut cum = 0.0;
            let mut lam_prev = intensity.eval(0.0, w1[0], x[0]);
            for k in 0..grid.n_steps() {
                let t1 = grid.time(k + 1);
                let lam_next = intensity.eval(t1, w1[k + 1], x[k + 1]);
                let inc = 0.5 * (lam_prev + lam_next) * grid.step_len(k);
                if inc > 0.0 && cum + inc >= target {
                    let frac = ((target - cum) / inc).clamp(0.0, 1.0);
                    let tau = grid.time(k) + frac * grid.step_len(k);
                    return Ok(within(tau.max(f64::MIN_POSITIVE), horizon));
                }
                cum += inc;
                lam_prev = lam_next;
            }
            Ok(ChangeTime::BeyondHorizon)
        }
        RandomTimeSpec::HittingTime { level } => {
            check_len(w1, grid, "w1")?;
            let a = *level;
            let target = -(-u).ln_1p();
            let mut cum = 0.0;
            for k in 0..grid.n_steps() {
                let (w0, w1n) = (w1[k], w1[k + 1]);
                let dt = grid.step_len(k);
                if w0 >= a {
                    // only possible at k = 0 with a <= 0, excluded by validation
                    return Ok(within(grid.time(k).max(f64::MIN_POSITIVE), horizon));
                }
                if w1n >= a {
                    let frac = (a - w0) / (w1n - w0);
                    return Ok(within(grid.time(k) + frac * dt, horizon));
                }
                let p = (-2.0 * (a - w0) * (a - w1n) / dt).exp();
                let inc = -(-p).ln_1p();
                if inc > 0.0 && cum + inc >= target {
                    let frac = ((target - cum) / inc).clamp(0.0, 1.0);
                    return Ok(within(grid.time(k) + frac * dt, horizon));
                }
                cum += inc;
            }
            Ok(ChangeTime::BeyondHorizon)
        }
    }
}

fn within(t: f64, horizon: f64) -> ChangeTime {
    if t <= horizon {
        ChangeTime::Within(t)
    } else {
        ChangeTime::BeyondHorizon
    }
}

fn check_len(v: &[f64], grid: &TimeGrid, name: &str) -> Result<()> {
    if v.len() != grid.len() {
        return Err(Error::InconsistentData(format!(
            "{name} has {} nodes, grid has {}",
            v.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Predictable compensator `A_t` of `1{tau <= t}` on the grid, for the
/// independent-law (hazard `f / (1 - F)`) and Cox (`lambda`) constructions.
///
/// `A` is accumulated by the trapezoid rule up to `t ∧ tau` and is constant
/// afterwards. `w1` and `x` are only read by the Cox construction.
pub fn compensator(spec: &RandomTimeSpec, tau: ChangeTime, grid: &TimeGrid, w1: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let stop = tau.time().unwrap_or(f64::INFINITY).min(grid.horizon());
    let rate_at: Box<dyn Fn(usize) -> Result<f64> + '_> = match spec {
        RandomTimeSpec::Deterministic { .. } => return Err(Error::CompensatorUndefined("deterministic time")),
        RandomTimeSpec::HittingTime { .. } => return Err(Error::CompensatorUndefined("hitting time")),
        RandomTimeSpec::IndependentLaw(law) => Box::new(move |k| hazard(law, grid.time(k))),
        RandomTimeSpec::Cox(intensity) => {
            check_len(w1, grid, "w1")?;
            check_len(x, grid, "x")?;
            Box::new(move |k| Ok(intensity.eval(grid.time(k), w1[k], x[k])))
        }
    };
    let mut a = vec![0.0; grid.len()];
    let mut prev_rate = rate_at(0)?;
    for k in 0..grid.n_steps() {
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        if t0 >= stop {
            a[k + 1] = a[k];
            continue;
        }
        if t1 <= stop {
            let next_rate = rate_at(k + 1)?;
            a[k + 1] = a[k] + 0.5 * (prev_rate + next_rate) * (t1 - t0);
            prev_rate = next_rate;
        } else {
            // partial step up to tau
            let end_rate = match spec {
                RandomTimeSpec::IndependentLaw(law) => hazard(law, stop)?,
                _ => {
                    let next_rate = rate_at(k + 1)?;
                    prev_rate + (next_rate - prev_rate) * (stop - t0) / (t1 - t0)
                }
            };
            a[k + 1] = a[k] + 0.5 * (prev_rate + end_rate) * (stop - t0);
        }
    }
    Ok(a)
}

fn hazard(law: &TimeLaw, t: f64) -> Result<f64> {
    let survival = 1.0 - law.cdf(t);
    if survival <= 1e-12 {
        return Err(Error::SingularHazard { time: t });
    }
    Ok(law.density(t) / survival)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 4096).unwrap()
    }

    fn zeros(g: &TimeGrid) -> Vec<f64> {
        vec![0.0; g.len()]
    }

    #[test]
    fn deterministic_ignores_u() {
        let g = grid();
        let s = RandomTimeSpec::Deterministic { t0: 0.5 };
        for u in [0.01, 0.5, 0.99] {
            assert_eq!(sample_tau(&s, &[], &[], &g, u).unwrap(), ChangeTime::Within(0.5));
        }
        let late = RandomTimeSpec::Deterministic { t0: 2.0 };
        assert_eq!(sample_tau(&late, &[], &[], &g, 0.3).unwrap(), ChangeTime::BeyondHorizon);
    }

    #[test]
    fn cox_constant_rate_inverts_exactly() {
        let g = grid();
        let s = RandomTimeSpec::Cox(Intensity::Constant(2.0));
        let u = 1.0 - (-1.0f64).exp();
        let tau = sample_tau(&s, &zeros(&g), &zeros(&g), &g, u).unwrap();
        assert_relative_eq!(tau.time().unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn uniform_law_inverts() {
        let g = grid();
        let s = RandomTimeSpec::IndependentLaw(TimeLaw::Uniform { lo: 0.0, hi: 1.0 });
        assert_relative_eq!(sample_tau(&s, &[], &[], &g, 0.3).unwrap().time().unwrap(), 0.3);
    }

    #[test]
    fn invalid_uniform_rejected() {
        let g = grid();
        let s = RandomTimeSpec::Deterministic { t0: 0.5 };
        assert!(matches!(sample_tau(&s, &[], &[], &g, 0.0), Err(Error::InvalidUniform(_))));
        assert!(matches!(sample_tau(&s, &[], &[], &g, 1.0), Err(Error::InvalidUniform(_))));
    }

    #[test]
    fn hitting_time_endpoint_crossing_interpolates() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let w = [0.0, 0.2, 0.4, 1.2, 1.5];
        let s = RandomTimeSpec::HittingTime { level: 1.0 };
        // u tiny: bridge crossings in early steps are unlikely to trigger
        let tau = sample_tau(&s, &w, &[], &g, 1e-12).unwrap().time().unwrap();
        assert!(tau <= 0.75);
        let tau_late = sample_tau(&s, &w, &[], &g, 0.999_999_999).unwrap().time().unwrap();
        assert_relative_eq!(tau_late, 0.5 + 0.25 * 0.6 / 0.8, epsilon = 1e-12);
    }

    #[test]
    fn custom_law_inverse_matches_closed_form() {
        let law = TimeLaw::custom("exp2", |t: f64| 1.0 - (-2.0 * t).exp(), |t: f64| 2.0 * (-2.0 * t).exp());
        let exact = TimeLaw::Exponential { rate: 2.0 };
        for u in [0.1, 0.5, 0.9] {
            assert_relative_eq!(law.inverse_cdf(u), exact.inverse_cdf(u), epsilon = 1e-12);
        }
    }

    #[test]
    fn validation_catches_bad_laws() {
        assert!(RandomTimeSpec::Deterministic { t0: 0.0 }.validate(1.0).is_err());
        assert!(RandomTimeSpec::HittingTime { level: -1.0 }.validate(1.0).is_err());
        assert!(RandomTimeSpec::Cox(Intensity::Constant(-1.0)).validate(1.0).is_err());
        let inconsistent = TimeLaw::custom("bad", |t: f64| t.min(1.0), |_| 2.0);
        assert!(RandomTimeSpec::IndependentLaw(inconsistent).validate(1.0).is_err());
        assert!(RandomTimeSpec::IndependentLaw(TimeLaw::Exponential { rate: 1.5 }).validate(1.0).is_ok());
        assert!(RandomTimeSpec::IndependentLaw(TimeLaw::Uniform { lo: 0.0, hi: 2.0 }).validate(1.0).is_ok());
    }

    #[test]
    fn compensator_uniform_law_is_log_two() {
        let g = grid();
        let s = RandomTimeSpec::IndependentLaw(TimeLaw::Uniform { lo: 0.0, hi: 2.0 });
        let a = compensator(&s, ChangeTime::Within(1.0), &g, &[], &[]).unwrap();
        assert_relative_eq!(a[g.n_steps()], std::f64::consts::LN_2, epsilon = 1e-6);
        assert!(a.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn compensator_cox_constant() {
        let g = grid();
        let s = RandomTimeSpec::Cox(Intensity::Constant(2.0));
        let a = compensator(&s, ChangeTime::Within(0.5), &g, &zeros(&g), &zeros(&g)).unwrap();
        assert_relative_eq!(a[g.n_steps()], 1.0, epsilon = 1e-12);
        assert_relative_eq!(a[g.n_steps() / 4], 0.5, epsilon = 1e-12);
        // constant after tau
        assert!(a[g.n_steps() / 2..].iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn compensator_partial_step() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let s = RandomTimeSpec::Cox(Intensity::Constant(1.0));
        let a = compensator(&s, ChangeTime::Within(0.3), &g, &zeros(&g), &zeros(&g)).unwrap();
        assert_relative_eq!(a[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(a[2], 0.3, epsilon = 1e-15);
        assert_relative_eq!(a[4], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn compensator_undefined_for_predictable_times() {
        let g = grid();
        let det = RandomTimeSpec::Deterministic { t0: 0.5 };
        assert!(matches!(
            compensator(&det, ChangeTime::Within(0.5), &g, &[], &[]),
            Err(Error::CompensatorUndefined(_))
        ));
        let hit = RandomTimeSpec::HittingTime { level: 1.0 };
        assert!(matches!(
            compensator(&hit, ChangeTime::Within(0.5), &g, &[], &[]),
            Err(Error::CompensatorUndefined(_))
        ));
    }

    #[test]
    fn compensator_rejects_singular_hazard() {
        let g = grid();
        let s = RandomTimeSpec::IndependentLaw(TimeLaw::Uniform { lo: 0.0, hi: 1.0 });
        assert!(matches!(
            compensator(&s, ChangeTime::BeyondHorizon, &g, &[], &[]),
            Err(Error::SingularHazard { .. })
        ));
    }
}
