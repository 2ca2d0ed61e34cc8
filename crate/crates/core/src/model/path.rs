use serde::Serialize;

use crate::model::coefficients::Regime;
use crate::model::grid::TimeGrid;
use crate::model::random_time::ChangeTime;

/// Driver and state values at the change point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchPoint {
    pub time: f64,
    /// Grid step `k` with `t_k < tau <= t_{k+1}`.
    pub step: usize,
    pub w1: f64,
    pub w2: f64,
    pub x: f64,
}

/// One simulated path on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub index: usize,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub switch: Option<SwitchPoint>,
    /// Number of draws needed to satisfy the conditioning window.
    pub attempts: usize,
}

impl PathBundle {
    pub fn tau(&self) -> ChangeTime {
        match self.switch {
            Some(sp) => ChangeTime::Within(sp.time),
            None => ChangeTime::BeyondHorizon,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.x.len() - 1
    }

    /// Regime in force at node `k`: post-switch once `t_k > tau`.
    pub fn regime_at(&self, k: usize, grid: &TimeGrid) -> Regime {
        if self.tau().switched_by(grid.time(k)) {
            Regime::Post
        } else {
            Regime::Pre
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_flag_switches_strictly_after_tau() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let p = PathBundle {
            index: 0,
            w1: vec![0.0; 5],
            w2: vec![0.0; 5],
            x: vec![0.0; 5],
            s: vec![1.0; 5],
            switch: Some(SwitchPoint { time: 0.5, step: 1, w1: 0.0, w2: 0.0, x: 0.0 }),
            attempts: 1,
        };
        let flags: Vec<u8> = (0..5).map(|k| p.regime_at(k, &grid).flag()).collect();
        assert_eq!(flags, vec![0, 0, 0, 1, 1]);
    }
}
