use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

type CoefClosure = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A coefficient function `(t, x) -> value`.
///
/// The named families are the ones a scenario file can reference; `Custom`
/// exists for programmatic use and tests.
#[derive(Clone)]
pub enum CoefFn {
    Constant(f64),
    /// `a + b t + c x`
    Affine { a: f64, b: f64, c: f64 },
    /// `lo + (hi - lo) / (1 + exp(-slope (x - center)))`, bounded in `[lo, hi]`
    BoundedSigmoid { lo: f64, hi: f64, slope: f64, center: f64 },
    Custom { name: String, f: CoefClosure },
}

impl CoefFn {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        CoefFn::Custom { name: name.into(), f: Arc::new(f) }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            CoefFn::Constant(c) => *c,
            CoefFn::Affine { a, b, c } => a + b * t + c * x,
            CoefFn::BoundedSigmoid { lo, hi, slope, center } => {
                lo + (hi - lo) / (1.0 + (-slope * (x - center)).exp())
            }
            CoefFn::Custom { f, .. } => f(t, x),
        }
    }

    /// Whether the function ignores `x` (constant in the state variable).
    pub fn is_state_free(&self) -> bool {
        match self {
            CoefFn::Constant(_) => true,
            CoefFn::Affine { c, .. } => *c == 0.0,
            CoefFn::BoundedSigmoid { lo, hi, slope, .. } => lo == hi || *slope == 0.0,
            CoefFn::Custom { .. } => false,
        }
    }

    /// Canonical text form, used for fingerprints and reports.
    pub fn describe(&self) -> String {
        match self {
            CoefFn::Constant(c) => format!("constant({c:?})"),
            CoefFn::Affine { a, b, c } => format!("affine({a:?},{b:?},{c:?})"),
            CoefFn::BoundedSigmoid { lo, hi, slope, center } => {
                format!("bounded_sigmoid({lo:?},{hi:?},{slope:?},{center:?})")
            }
            CoefFn::Custom { name, .. } => format!("custom({name})"),
        }
    }
}

impl fmt::Debug for CoefFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Drift and volatility of the two regimes together with the declared
/// Lipschitz bound `K`.
#[derive(Debug, Clone)]
pub struct RegimeCoefficients {
    pub mu1: CoefFn,
    pub mu2: CoefFn,
    pub sigma1: CoefFn,
    pub sigma2: CoefFn,
    pub lipschitz: f64,
}

/// Regime index: `Pre` on `[0, tau]`, `Post` on `(tau, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Regime {
    Pre,
    Post,
}

impl Regime {
    pub fn flag(self) -> u8 {
        match self {
            Regime::Pre => 0,
            Regime::Post => 1,
        }
    }

    pub fn from_flag(flag: u8) -> Self {
        if flag == 0 {
            Regime::Pre
        } else {
            Regime::Post
        }
    }
}

impl RegimeCoefficients {
    pub fn new(mu1: CoefFn, mu2: CoefFn, sigma1: CoefFn, sigma2: CoefFn, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::invalid("lipschitz", format!("must be positive, got {lipschitz}")));
        }
        Ok(RegimeCoefficients { mu1, mu2, sigma1, sigma2, lipschitz })
    }

    /// Constant coefficients in both regimes.
    pub fn constant(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64) -> Self {
        RegimeCoefficients {
            mu1: CoefFn::Constant(mu1),
            mu2: CoefFn::Constant(mu2),
            sigma1: CoefFn::Constant(sigma1),
            sigma2: CoefFn::Constant(sigma2),
            lipschitz: 1.0,
        }
    }

    #[inline]
    pub fn drift(&self, regime: Regime, t: f64, x: f64) -> f64 {
        match regime {
            Regime::Pre => self.mu1.eval(t, x),
            Regime::Post => self.mu2.eval(t, x),
        }
    }

    #[inline]
    pub fn vol(&self, regime: Regime, t: f64, x: f64) -> f64 {
        match regime {
            Regime::Pre => self.sigma1.eval(t, x),
            Regime::Post => self.sigma2.eval(t, x),
        }
    }

    fn named(&self) -> [(&'static str, &CoefFn); 4] {
        [("mu1", &self.mu1), ("mu2", &self.mu2), ("sigma1", &self.sigma1), ("sigma2", &self.sigma2)]
    }

    pub fn describe(&self) -> String {
        format!(
            "mu1={};mu2={};sigma1={};sigma2={};K={:?}",
            self.mu1.describe(),
            self.mu2.describe(),
            self.sigma1.describe(),
            self.sigma2.describe(),
            self.lipschitz
        )
    }

    /// Growth constant `Kbar` with `f(t,x)^2 <= Kbar (1 + x^2)` for all four
    /// functions, derived from the Lipschitz bound and the values at `x = 0`
    /// on the lattice time nodes.
    pub fn growth_constant(&self, lattice: &ProbeLattice) -> f64 {
        let at_zero = lattice
            .t_nodes()
            .flat_map(|t| self.named().map(|(_, f)| f.eval(t, 0.0).powi(2)))
            .fold(0.0, f64::max);
        2.0 * at_zero.max(self.lipschitz * self.lipschitz)
    }

    /// Whether the two volatility functions agree on the lattice (identical
    /// volatility case), up to a relative tolerance.
    pub fn identical_vol(&self, lattice: &ProbeLattice) -> bool {
        lattice.nodes().all(|(t, x)| {
            let a = self.sigma1.eval(t, x);
            let b = self.sigma2.eval(t, x);
            (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
        })
    }

    /// Whether the two drift functions agree on the lattice.
    pub fn identical_drift(&self, lattice: &ProbeLattice) -> bool {
        lattice.nodes().all(|(t, x)| {
            let a = self.mu1.eval(t, x);
            let b = self.mu2.eval(t, x);
            (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
        })
    }

    /// Probes positivity, the Lipschitz bound and continuity of the
    /// volatilities on `lattice`. Violations are returned as data.
    pub fn validate(&self, lattice: &ProbeLattice) -> ValidationReport {
        let mut violations = Vec::new();
        let tol = 1e-12;
        for (name, f) in self.named() {
            let is_vol = name.starts_with("sigma");
            for t in lattice.t_nodes() {
                let xs: Vec<f64> = lattice.x_nodes().collect();
                let vals: Vec<f64> = xs.iter().map(|&x| f.eval(t, x)).collect();
                for (j, (&x, &v)) in xs.iter().zip(&vals).enumerate() {
                    if !v.is_finite() || (is_vol && v <= 0.0) {
                        violations.push(Violation {
                            kind: ViolationKind::Positivity,
                            function: name,
                            t,
                            x,
                            detail: format!("value {v}"),
                        });
                    }
                    if j + 1 < xs.len() {
                        let dx = xs[j + 1] - x;
                        let slope = (vals[j + 1] - v).abs() / dx;
                        if slope > self.lipschitz * (1.0 + tol) {
                            violations.push(Violation {
                                kind: ViolationKind::Lipschitz,
                                function: name,
                                t,
                                x,
                                detail: format!("slope {slope:.6} to x={:.6} exceeds K={}", xs[j + 1], self.lipschitz),
                            });
                        }
                    }
                    if is_vol {
                        let h = 1e-8;
                        let jump_x = (f.eval(t, x + h) - v).abs();
                        let jump_t = (f.eval((t + h * lattice.horizon).min(lattice.horizon), x) - v).abs();
                        let scale = 1e-5 * (1.0 + v.abs());
                        if jump_x > scale || jump_t > scale {
                            violations.push(Violation {
                                kind: ViolationKind::Continuity,
                                function: name,
                                t,
                                x,
                                detail: format!("finite-difference jump {:.3e}", jump_x.max(jump_t)),
                            });
                        }
                    }
                }
            }
        }
        ValidationReport { violations }
    }
}

/// Uniform probe lattice on `[0, T] x [x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeLattice {
    pub horizon: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_t: usize,
    pub n_x: usize,
}

impl ProbeLattice {
    /// 64 x 64 nodes on `[0, T] x [-10, 10]`.
    pub fn standard(horizon: f64) -> Self {
        ProbeLattice { horizon, x_min: -10.0, x_max: 10.0, n_t: 64, n_x: 64 }
    }

    pub fn t_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_t.max(2);
        (0..n).map(move |i| self.horizon * i as f64 / (n - 1) as f64)
    }

    pub fn x_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_x.max(2);
        (0..n).map(move |j| self.x_min + (self.x_max - self.x_min) * j as f64 / (n - 1) as f64)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t_nodes().flat_map(move |t| self.x_nodes().map(move |x| (t, x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Positivity,
    Lipschitz,
    Continuity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub function: &'static str,
    pub t: f64,
    pub x: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice() -> ProbeLattice {
        ProbeLattice::standard(1.0)
    }

    #[test]
    fn constant_coefficients_pass() {
        let c = RegimeCoefficients::constant(0.05, 0.05, 0.2, 0.4);
        assert!(c.validate(&lattice()).passed());
    }

    #[test]
    fn abs_volatility_fails_positivity_only_at_zero() {
        // the standard lattice has no node at exactly 0; use an odd x-count
        let lat = ProbeLattice { n_x: 65, ..lattice() };
        let mut c = RegimeCoefficients::constant(0.0, 0.0, 0.2, 0.2);
        c.sigma1 = CoefFn::custom("abs", |_, x: f64| x.abs());
        let r = c.validate(&lat);
        let pos: Vec<_> = r.violations.iter().filter(|v| v.kind == ViolationKind::Positivity).collect();
        assert!(!pos.is_empty());
        assert!(pos.iter().all(|v| v.x == 0.0 && v.function == "sigma1"));
    }

    #[test]
    fn quadratic_drift_violates_lipschitz_away_from_origin() {
        let mut c = RegimeCoefficients::constant(0.0, 0.0, 0.2, 0.2);
        c.mu1 = CoefFn::custom("square", |_, x: f64| x * x);
        let r = c.validate(&lattice());
        assert!(r.count(ViolationKind::Lipschitz) > 0);
        for v in r.violations.iter().filter(|v| v.kind == ViolationKind::Lipschitz) {
            assert_eq!(v.function, "mu1");
            // slope between neighbours x and x+h is |2x + h| > 1
            assert!(v.x.abs() > 0.5 || (v.x + 20.0 / 63.0).abs() > 0.5);
        }
        assert_eq!(r.count(ViolationKind::Positivity), 0);
    }

    #[test]
    fn discontinuous_vol_is_flagged() {
        let mut c = RegimeCoefficients::constant(0.0, 0.0, 0.2, 0.2);
        c.lipschitz = 1e9;
        // jump just to the right of the first x node
        c.sigma2 = CoefFn::custom("step", |_, x: f64| if x < -10.0 + 5e-9 { 0.2 } else { 0.5 });
        let r = c.validate(&lattice());
        assert!(r.count(ViolationKind::Continuity) > 0);
        assert!(r.violations.iter().all(|v| v.function == "sigma2"));
    }

    #[test]
    fn sigmoid_family_is_bounded_and_lipschitz() {
        let f = CoefFn::BoundedSigmoid { lo: 0.1, hi: 0.3, slope: 4.0, center: 0.0 };
        assert!((f.eval(0.0, 0.0) - 0.2).abs() < 1e-15);
        let c = RegimeCoefficients::new(CoefFn::Constant(0.0), CoefFn::Constant(0.0), f.clone(), f, 0.2).unwrap();
        assert!(c.validate(&lattice()).passed());
    }

    #[test]
    fn growth_constant_dominates_squares() {
        let c = RegimeCoefficients::constant(0.05, -0.1, 0.2, 0.4);
        let kb = c.growth_constant(&lattice());
        for (t, x) in lattice().nodes() {
            for r in [Regime::Pre, Regime::Post] {
                assert!(c.drift(r, t, x).powi(2) <= kb * (1.0 + x * x));
                assert!(c.vol(r, t, x).powi(2) <= kb * (1.0 + x * x));
            }
        }
    }

    #[test]
    fn identical_vol_detection() {
        assert!(RegimeCoefficients::constant(0.0, 0.1, 0.3, 0.3).identical_vol(&lattice()));
        assert!(!RegimeCoefficients::constant(0.0, 0.0, 0.2, 0.4).identical_vol(&lattice()));
    }
}
