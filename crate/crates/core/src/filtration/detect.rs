use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::coefficients::Regime;
use crate::model::grid::TimeGrid;
use crate::model::scenario::ModelSpec;

/// Relative gap between the squared volatilities below which a path is
/// declared undetectable.
pub const SEPARATION_FLOOR: f64 = 1e-6;

/// Backward-window realised variance detector settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Number of increments in the window.
    pub window: usize,
    /// Consecutive post-switch classifications required to flag a switch.
    pub run_length: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { window: 64, run_length: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DetectionResult {
    Detected {
        tau_hat: f64,
        switch_index: usize,
        /// Smallest normalised classification margin over the flagging run,
        /// in `(0, 1]` where 1 means the estimate sat on the post-switch level.
        margin: f64,
    },
    NoSwitch,
    /// The two volatility functions are not separated along the path, so
    /// the state carries no usable information about the switch.
    Undetectable,
}

impl DetectionResult {
    pub fn label(&self) -> &'static str {
        match self {
            DetectionResult::Detected { .. } => "detected",
            DetectionResult::NoSwitch => "no_switch",
            DetectionResult::Undetectable => "undetectable",
        }
    }

    pub fn tau_hat(&self) -> Option<f64> {
        match self {
            DetectionResult::Detected { tau_hat, .. } => Some(*tau_hat),
            _ => None,
        }
    }
}

/// Realised variance over the `window` increments ending at node `k`,
/// `sum (dx)^2 / (window dt)`; `None` for `k < window`.
pub fn realized_variance(x: &[f64], grid: &TimeGrid, window: usize) -> Result<Vec<Option<f64>>> {
    let n = grid.n_steps();
    if x.len() != n + 1 {
        return Err(Error::InconsistentData(format!("path has {} nodes, grid has {}", x.len(), n + 1)));
    }
    if window < 2 || window > n / 8 {
        return Err(Error::invalid("window", format!("must lie in [2, {}], got {window}", n / 8)));
    }
    let sq: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
    let norm = window as f64 * grid.dt();
    let mut out = vec![None; n + 1];
    let mut acc: f64 = sq[..window].iter().sum();
    out[window] = Some(acc / norm);
    for k in window + 1..=n {
        acc += sq[k - 1] - sq[k - 1 - window];
        // refresh periodically so the running sum does not drift
        if k % 256 == 0 {
            acc = sq[k - window..k].iter().sum();
        }
        out[k] = Some(acc.max(0.0) / norm);
    }
    Ok(out)
}

/// Flags the first node starting a run of `run_length` consecutive nodes at
/// which the realised variance is closer to the post-switch squared
/// volatility than to the pre-switch one (ties go to the pre-switch regime).
///
/// The reported `tau_hat` is the time of that node, so it lags the true
/// switch by roughly half a window.
pub fn detect_switch(spec: &ModelSpec, x: &[f64], config: DetectorConfig) -> Result<DetectionResult> {
    if config.run_length == 0 {
        return Err(Error::invalid("run_length", "must be positive"));
    }
    let grid = &spec.grid;
    let c = &spec.coefficients;
    let v = realized_variance(x, grid, config.window)?;
    let separated = x.iter().enumerate().all(|(k, &xk)| {
        let t = grid.time(k);
        let s1 = c.vol(Regime::Pre, t, xk).powi(2);
        let s2 = c.vol(Regime::Post, t, xk).powi(2);
        (s1 - s2).abs() > SEPARATION_FLOOR * s1.max(s2)
    });
    if !separated {
        return Ok(DetectionResult::Undetectable);
    }
    let mut run_start = None;
    let mut run_margin = f64::INFINITY;
    for (k, vk) in v.iter().enumerate() {
        let Some(vk) = *vk else { continue };
        let t = grid.time(k);
        let s1 = c.vol(Regime::Pre, t, x[k]).powi(2);
        let s2 = c.vol(Regime::Post, t, x[k]).powi(2);
        let (d1, d2) = ((vk - s1).abs(), (vk - s2).abs());
        let gap = (s2 - s1).abs();
        if d2 < d1 && gap > 0.0 {
            let m = ((d1 - d2) / gap).min(1.0);
            let start = *run_start.get_or_insert(k);
            run_margin = run_margin.min(m);
            if k + 1 - start >= config.run_length {
                return Ok(DetectionResult::Detected {
                    tau_hat: grid.time(start),
                    switch_index: start,
                    margin: run_margin,
                });
            }
        } else {
            run_start = None;
            run_margin = f64::INFINITY;
        }
    }
    Ok(DetectionResult::NoSwitch)
}
