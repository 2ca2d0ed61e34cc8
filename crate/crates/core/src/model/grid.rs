use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid `t_k = k * dt` on `[0, horizon]` with `t_n = horizon` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("horizon", format!("must be positive and finite, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be at least 1"));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Length of step `k`, i.e. `t_{k+1} - t_k`.
    pub fn step_len(&self, k: usize) -> f64 {
        self.time(k + 1) - self.time(k)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Index `k` of the step with `t_k < t <= t_{k+1}`, for `t` in `(0, horizon]`.
    pub fn step_containing(&self, t: f64) -> Option<usize> {
        if !(t > 0.0 && t <= self.horizon) {
            return None;
        }
        let mut k = ((t / self.dt()).ceil() as usize).clamp(1, self.n_steps) - 1;
        // guard against rounding in the division
        while k > 0 && self.time(k) >= t {
            k -= 1;
        }
        while k + 1 < self.n_steps && self.time(k + 1) < t {
            k += 1;
        }
        Some(k)
    }

    /// Largest node index with `t_k <= t` (clamped to the grid).
    pub fn floor_index(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        if t >= self.horizon {
            return self.n_steps;
        }
        let mut k = (t / self.dt()).floor() as usize;
        while k > 0 && self.time(k) > t {
            k -= 1;
        }
        while k < self.n_steps && self.time(k + 1) <= t {
            k += 1;
        }
        k
    }

    /// Coarsened grid with `n_steps / factor` steps; `factor` must divide `n_steps`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::invalid("factor", format!("{factor} does not divide {}", self.n_steps)));
        }
        TimeGrid::new(self.horizon, self.n_steps / factor)
    }
}
