use crate::error::{Error, Result};
use crate::exec;
use crate::model::coefficients::{Regime, RegimeCoefficients};
use crate::model::grid::TimeGrid;
use crate::model::path::{PathBundle, SwitchPoint};
use crate::model::random_time::{sample_tau, ChangeTime, RandomTimeSpec};
use crate::model::scenario::{ModelSpec, ScenarioConfig};
use crate::rng::PathRng;

/// Brownian nodes and the change point accepted for one path.
pub(crate) struct Draw {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub tau: ChangeTime,
    pub attempts: usize,
}

/// Draws Brownian nodes on `grid` and then the change point, redrawing
/// everything until the conditioning window (if any) is met.
pub(crate) fn draw(spec: &ModelSpec, grid: &TimeGrid, rng: &mut PathRng, index: usize) -> Result<Draw> {
    let n = grid.n_steps();
    let sq = grid.dt().sqrt();
    for attempt in 1..=spec.max_attempts {
        let mut w1 = Vec::with_capacity(n + 1);
        let mut w2 = Vec::with_capacity(n + 1);
        w1.push(0.0);
        w2.push(0.0);
        for k in 0..n {
            let z1 = rng.normal();
            let z2 = rng.normal();
            w1.push(w1[k] + sq * z1);
            w2.push(w2[k] + sq * z2);
        }
        let pre = match spec.tau {
            RandomTimeSpec::Cox(_) => pre_switch_state(&spec.coefficients, grid, &w1),
            _ => Vec::new(),
        };
        let u = rng.open_uniform();
        let tau = sample_tau(&spec.tau, &w1, &pre, grid, u)?;
        let accepted = match (spec.window, tau) {
            (None, _) => true,
            (Some((lo, hi)), ChangeTime::Within(t)) => t >= lo && t <= hi,
            (Some(_), ChangeTime::BeyondHorizon) => false,
        };
        if accepted {
            return Ok(Draw { w1, w2, tau, attempts: attempt });
        }
    }
    Err(Error::RejectionExhausted { path: index, attempts: spec.max_attempts })
}

/// Euler path of the pre-switch dynamics driven by `w1` alone.
fn pre_switch_state(c: &RegimeCoefficients, grid: &TimeGrid, w1: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(w1.len());
    x.push(0.0);
    for k in 0..grid.n_steps() {
        let t = grid.time(k);
        let xk = x[k];
        x.push(xk + c.mu1.eval(t, xk) * grid.step_len(k) + c.sigma1.eval(t, xk) * (w1[k + 1] - w1[k]));
    }
    x
}

/// Driver values at tau: exact level for hitting times, Brownian bridge
/// otherwise (using the two normals `xi`).
pub(crate) fn bridge_at_tau(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w1: &[f64],
    w2: &[f64],
    tau: f64,
    xi: (f64, f64),
) -> (usize, f64, f64) {
    let k = grid.step_containing(tau).unwrap_or(grid.n_steps() - 1);
    let (t0, t1) = (grid.time(k), grid.time(k + 1));
    let h = t1 - t0;
    let a = ((tau - t0) / h).clamp(0.0, 1.0);
    let sd = ((tau - t0).max(0.0) * (t1 - tau).max(0.0) / h).sqrt();
    let b1 = match spec.tau {
        RandomTimeSpec::HittingTime { level } => level,
        _ => w1[k] + a * (w1[k + 1] - w1[k]) + sd * xi.0,
    };
    let b2 = w2[k] + a * (w2[k + 1] - w2[k]) + sd * xi.1;
    (k, b1, b2)
}

/// Euler scheme for log-price and state with the step containing tau split
/// at tau. Returns `(x, s, switch)`.
pub(crate) fn evolve(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w1: &[f64],
    w2: &[f64],
    at_tau: Option<(f64, usize, f64, f64)>,
    index: usize,
) -> Result<(Vec<f64>, Vec<f64>, Option<SwitchPoint>)> {
    let c = &spec.coefficients;
    let rho = spec.rho;
    let rho_bar = (1.0 - rho * rho).max(0.0).sqrt();
    let n = grid.n_steps();
    let mut x = Vec::with_capacity(n + 1);
    let mut ls = Vec::with_capacity(n + 1);
    x.push(0.0);
    ls.push(spec.s0.ln());
    let mut switch = None;
    for k in 0..n {
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        let (xk, lk) = (x[k], ls[k]);
        let (xn, ln) = match at_tau {
            Some((tau, step, b1, b2)) if k == step => {
                let (m, v) = (c.mu1.eval(t0, xk), c.sigma1.eval(t0, xk));
                let h_a = tau - t0;
                let dx_a = m * h_a + v * (b1 - w1[k]);
                let x_tau = xk + dx_a;
                let l_tau = lk + dx_a - 0.5 * v * v * h_a;
                switch = Some(SwitchPoint { time: tau, step, w1: b1, w2: b2, x: x_tau });
                let (m2, v2) = (c.mu2.eval(tau, x_tau), c.sigma2.eval(tau, x_tau));
                let h_b = t1 - tau;
                let dw = rho * (w1[k + 1] - b1) + rho_bar * (w2[k + 1] - b2);
                let dx_b = m2 * h_b + v2 * dw;
                (x_tau + dx_b, l_tau + dx_b - 0.5 * v2 * v2 * h_b)
            }
            Some((_, step, _, _)) if k > step => {
                let (m, v) = (c.mu2.eval(t0, xk), c.sigma2.eval(t0, xk));
                let h = t1 - t0;
                let dw = rho * (w1[k + 1] - w1[k]) + rho_bar * (w2[k + 1] - w2[k]);
                let dx = m * h + v * dw;
                (xk + dx, lk + dx - 0.5 * v * v * h)
            }
            _ => {
                let (m, v) = (c.mu1.eval(t0, xk), c.sigma1.eval(t0, xk));
                let h = t1 - t0;
                let dx = m * h + v * (w1[k + 1] - w1[k]);
                (xk + dx, lk + dx - 0.5 * v * v * h)
            }
        };
        if !(xn.is_finite() && ln.is_finite() && ln < 700.0) {
            return Err(Error::NumericalOverflow { path: index, step: k });
        }
        x.push(xn);
        ls.push(ln);
    }
    let mut s: Vec<f64> = ls.into_iter().map(f64::exp).collect();
    s[0] = spec.s0;
    Ok((x, s, switch))
}

/// Simulates path `index` of the run seeded by `seed`.
///
/// Per path the stream is consumed in a fixed order: all driver increments,
/// the uniform for the change point (repeated on window rejection), then two
/// bridge normals for the driver values at tau.
pub fn simulate_path(spec: &ModelSpec, seed: u64, index: usize) -> Result<PathBundle> {
    let grid = &spec.grid;
    let mut rng = PathRng::new(seed, index as u64);
    let d = draw(spec, grid, &mut rng, index)?;
    let xi = (rng.normal(), rng.normal());
    let at_tau = d.tau.time().map(|tau| {
        let (k, b1, b2) = bridge_at_tau(spec, grid, &d.w1, &d.w2, tau, xi);
        (tau, k, b1, b2)
    });
    let (x, s, switch) = evolve(spec, grid, &d.w1, &d.w2, at_tau, index)?;
    Ok(PathBundle { index, w1: d.w1, w2: d.w2, x, s, switch, attempts: d.attempts })
}

/// Simulates paths `start..start + count`.
pub fn simulate_range(spec: &ModelSpec, seed: u64, start: usize, count: usize) -> Result<Vec<PathBundle>> {
    spec.validate_parameters()?;
    exec::try_map_indexed(count, |i| simulate_path(spec, seed, start + i))
}

/// Simulates paths `0..n_paths`.
pub fn simulate_paths(spec: &ModelSpec, seed: u64, n_paths: usize) -> Result<Vec<PathBundle>> {
    simulate_range(spec, seed, 0, n_paths)
}

/// All paths of a scenario on a shared grid.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub bundles: Vec<PathBundle>,
    pub grid: TimeGrid,
    pub fingerprint: String,
}

/// Simulates every path of a scenario.
pub fn simulate(config: &ScenarioConfig) -> Result<SimulationOutput> {
    config.validate_parameters()?;
    let bundles = simulate_paths(&config.model, config.master_seed, config.n_paths)?;
    Ok(SimulationOutput { bundles, grid: config.model.grid, fingerprint: config.fingerprint() })
}

/// Volatility in force over the step starting at node `k`.
pub fn node_vol(spec: &ModelSpec, path: &PathBundle, k: usize) -> f64 {
    let t = spec.grid.time(k);
    spec.coefficients.vol(path.regime_at(k, &spec.grid), t, path.x[k])
}

/// Drift in force over the step starting at node `k`.
pub fn node_drift(spec: &ModelSpec, path: &PathBundle, k: usize) -> f64 {
    let t = spec.grid.time(k);
    spec.coefficients.drift(path.regime_at(k, &spec.grid), t, path.x[k])
}

/// Regime for the step starting at node `k`, used by consumers that only
/// need the indicator.
pub fn node_regime(spec: &ModelSpec, path: &PathBundle, k: usize) -> Regime {
    path.regime_at(k, &spec.grid)
}

/// Piece of a grid step on which a single regime is in force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub t0: f64,
    pub h: f64,
    pub x0: f64,
    /// Composite driver increment over the piece.
    pub dw: f64,
    pub regime: Regime,
}

/// Step `k` split at tau when it contains the change point.
#[derive(Debug, Clone, Copy)]
pub struct StepPieces {
    items: [Piece; 2],
    len: usize,
}

impl StepPieces {
    pub fn as_slice(&self) -> &[Piece] {
        &self.items[..self.len]
    }
}

/// Decomposes step `k` of `path` into regime pieces with their composite
/// driver increments.
pub fn step_pieces(spec: &ModelSpec, path: &PathBundle, k: usize) -> StepPieces {
    let grid = &spec.grid;
    let rho = spec.rho;
    let rho_bar = (1.0 - rho * rho).max(0.0).sqrt();
    let (t0, t1) = (grid.time(k), grid.time(k + 1));
    let d1 = path.w1[k + 1] - path.w1[k];
    let d2 = path.w2[k + 1] - path.w2[k];
    let whole = |regime| Piece {
        t0,
        h: t1 - t0,
        x0: path.x[k],
        dw: if regime == Regime::Pre { d1 } else { rho * d1 + rho_bar * d2 },
        regime,
    };
    match path.switch {
        Some(sp) if k == sp.step => {
            let pre = Piece { t0, h: sp.time - t0, x0: path.x[k], dw: sp.w1 - path.w1[k], regime: Regime::Pre };
            let post = Piece {
                t0: sp.time,
                h: t1 - sp.time,
                x0: sp.x,
                dw: rho * (path.w1[k + 1] - sp.w1) + rho_bar * (path.w2[k + 1] - sp.w2),
                regime: Regime::Post,
            };
            StepPieces { items: [pre, post], len: 2 }
        }
        Some(sp) if k > sp.step => {
            let p = whole(Regime::Post);
            StepPieces { items: [p, p], len: 1 }
        }
        _ => {
            let p = whole(Regime::Pre);
            StepPieces { items: [p, p], len: 1 }
        }
    }
}
