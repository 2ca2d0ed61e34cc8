use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::model::scenario::{FiltrationTag, ModelSpec};
use crate::sde::simulate_path;
use crate::stats;

use super::mpr::risk_path;

/// Exponents `j` of the cut-offs `eps = 2^-j T`.
pub const NA1_RUNGS: std::ops::RangeInclusive<i32> = 3..=9;

const STABLE_SPREAD: f64 = 0.05;
const STABLE_SHARE: f64 = 0.9;
const DIVERGING_RATIO: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Na1Verdict {
    Stable,
    Diverging,
    Inconclusive,
}

impl Na1Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Na1Verdict::Stable => "stable",
            Na1Verdict::Diverging => "diverging",
            Na1Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Na1Report {
    pub verdict: Na1Verdict,
    pub eps: Vec<f64>,
    /// Median over included paths of `int_0^{min(T, s) - eps} lambda^2 dt`.
    pub median_energy: Vec<f64>,
    /// Ratios of consecutive medians over the last three cut-offs.
    pub growth: Vec<f64>,
    pub stable_fraction: f64,
    /// `None` for excluded paths.
    #[serde(skip)]
    pub path_stable: Vec<Option<bool>>,
    pub excluded: usize,
}

/// Classifies the energy ladders of a set of paths (`None` = excluded).
pub fn na1_from_integrals(eps: Vec<f64>, ladders: &[Option<Vec<f64>>]) -> Result<Na1Report> {
    let m = eps.len();
    if m < 3 {
        return Err(Error::invalid("eps", "need at least three cut-offs"));
    }
    let path_stable: Vec<Option<bool>> = ladders
        .iter()
        .map(|l| {
            l.as_ref().map(|v| {
                let tail = &v[m - 3..];
                let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
                hi == 0.0 || (hi - lo) / hi < STABLE_SPREAD
            })
        })
        .collect();
    let included: Vec<&Vec<f64>> = ladders.iter().flatten().collect();
    let excluded = ladders.len() - included.len();
    if included.is_empty() {
        return Err(Error::TooFewPaths { got: 0, min: 1 });
    }
    let median_energy: Vec<f64> = (0..m)
        .map(|j| stats::median(&included.iter().map(|v| v[j]).collect::<Vec<_>>()))
        .collect();
    let growth: Vec<f64> = median_energy[m - 3..].windows(2).map(|w| w[1] / w[0]).collect();
    let stable_count = path_stable.iter().filter(|s| **s == Some(true)).count();
    let stable_fraction = stable_count as f64 / included.len() as f64;
    let diverging = median_energy[m - 3..].windows(2).all(|w| w[1] > w[0])
        && growth.iter().all(|g| *g >= DIVERGING_RATIO);
    let verdict = if diverging {
        Na1Verdict::Diverging
    } else if stable_fraction >= STABLE_SHARE {
        Na1Verdict::Stable
    } else {
        Na1Verdict::Inconclusive
    };
    Ok(Na1Report { verdict, eps, median_energy, growth, stable_fraction, path_stable, excluded })
}

/// Energy of the market price of risk up to `min(T, s) - eps` for the
/// cut-offs `eps = 2^-j T`, `j` in [`NA1_RUNGS`], where `s` is the time at
/// which the market price of risk is singular (if any).
pub fn na1_test(spec: &ModelSpec, tag: FiltrationTag, seed: u64, n_paths: usize) -> Result<Na1Report> {
    spec.validate_parameters()?;
    super::mpr::check_support(spec, tag)?;
    let horizon = spec.grid.horizon();
    let eps: Vec<f64> = NA1_RUNGS.map(|j| horizon * 2f64.powi(-j)).collect();
    let ladders = exec::try_map_indexed(n_paths, |i| {
        let p = simulate_path(spec, seed, i)?;
        let r = risk_path(spec, &p, tag)?;
        if r.excluded {
            return Ok(None);
        }
        let end = r.singular_time.map_or(horizon, |s| s.min(horizon));
        Ok(Some(eps.iter().map(|e| r.energy_until((end - e).max(0.0))).collect::<Vec<f64>>()))
    })?;
    na1_from_integrals(eps, &ladders)
}
