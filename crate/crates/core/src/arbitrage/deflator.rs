use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::model::path::PathBundle;
use crate::model::scenario::{FiltrationTag, ModelSpec};
use crate::sde::{simulate_path, step_pieces};
use crate::stats::{self, MeanEstimate};

use super::mpr::risk_path;
use super::na1::{na1_test, Na1Verdict};

/// Minimum number of paths for the martingale tests.
pub const MIN_MARTINGALE_PATHS: usize = 1000;

/// Deflator `Z = E(-int lambda dB)` on the grid nodes.
///
/// Refused with [`Error::ArbitrageDetected`] when the market price of risk
/// is singular on this path.
pub fn deflator(spec: &ModelSpec, path: &PathBundle, tag: FiltrationTag) -> Result<Vec<f64>> {
    let r = risk_path(spec, path, tag)?;
    if let Some(s) = r.singular_time {
        return Err(Error::ArbitrageDetected(format!(
            "market price of risk for {tag} is singular at t = {s} on path {}",
            path.index
        )));
    }
    let n = path.n_steps();
    let mut z = Vec::with_capacity(n + 1);
    z.push(1.0);
    let mut log_z = 0.0;
    let mut i = 0;
    for k in 0..n {
        let pieces = step_pieces(spec, path, k).as_slice().len();
        for _ in 0..pieces {
            let l = r.lambda[i];
            log_z -= l * r.db[i] + 0.5 * l * l * r.h[i];
            i += 1;
        }
        z.push(log_z.exp());
    }
    Ok(z)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointResult {
    pub index: usize,
    pub mean_increment: f64,
    pub se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleReport {
    pub confidence: f64,
    pub n_paths: usize,
    pub checkpoints: Vec<CheckpointResult>,
    pub passed: bool,
}

/// Two-sided z-test of `E[Y_t - Y_0] = 0` at every checkpoint.
/// `values[p][c]` is the value of path `p` at checkpoint `c`; column 0 is
/// taken as `Y_0`.
pub fn martingale_test(values: &[Vec<f64>], checkpoints: &[usize], confidence: f64) -> Result<MartingaleReport> {
    if values.len() < MIN_MARTINGALE_PATHS {
        return Err(Error::TooFewPaths { got: values.len(), min: MIN_MARTINGALE_PATHS });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("confidence", format!("must lie in (0, 1), got {confidence}")));
    }
    if checkpoints.first() != Some(&0) {
        return Err(Error::invalid("checkpoints", "must start at node 0"));
    }
    if values.iter().any(|v| v.len() < checkpoints.len()) {
        return Err(Error::InconsistentData("fewer values than checkpoints on some path".into()));
    }
    let z = stats::two_sided_z(confidence);
    let mut out = Vec::with_capacity(checkpoints.len());
    for (c, &index) in checkpoints.iter().enumerate() {
        let inc: Vec<f64> = values.iter().map(|v| v[c] - v[0]).collect();
        let est = MeanEstimate::from_samples(&inc);
        let pass = est.mean.abs() <= z * est.se;
        out.push(CheckpointResult { index, mean_increment: est.mean, se: est.se, pass });
    }
    let passed = out.iter().all(|c| c.pass);
    Ok(MartingaleReport { confidence, n_paths: values.len(), checkpoints: out, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct DeflatedPriceReport {
    pub martingale: MartingaleReport,
    pub terminal_deflator: MeanEstimate,
    /// `E[Z_T]` within three standard errors of one.
    pub deflator_unbiased: bool,
}

/// Simulates `n_paths`, deflates the price and tests `S Z` for the
/// martingale property at `checkpoints` (node indices, should include 0).
pub fn deflated_price_test(
    spec: &ModelSpec,
    tag: FiltrationTag,
    seed: u64,
    n_paths: usize,
    checkpoints: &[usize],
    confidence: f64,
) -> Result<DeflatedPriceReport> {
    spec.validate_parameters()?;
    let n = spec.grid.n_steps();
    if let Some(&bad) = checkpoints.iter().find(|&&c| c > n) {
        return Err(Error::invalid("checkpoints", format!("node {bad} beyond the grid")));
    }
    if !checkpoints.contains(&n) {
        return Err(Error::invalid("checkpoints", "must include the horizon node"));
    }
    let rows = exec::try_map_indexed(n_paths, |i| {
        let p = simulate_path(spec, seed, i)?;
        let z = deflator(spec, &p, tag)?;
        let mut row: Vec<f64> = checkpoints.iter().map(|&c| p.s[c] * z[c]).collect();
        row.push(z[p.n_steps()]);
        Ok(row)
    })?;
    let m = checkpoints.len();
    let zt: Vec<f64> = rows.iter().map(|r| r[m]).collect();
    let martingale = martingale_test(&rows, checkpoints, confidence)?;
    let terminal_deflator = MeanEstimate::from_samples(&zt);
    let deflator_unbiased = terminal_deflator.covers(1.0, 3.0);
    Ok(DeflatedPriceReport { martingale, terminal_deflator, deflator_unbiased })
}

/// Deflator-weighted mean of the normalised driver `Y_T = int dX / sigma`,
/// which is a Brownian motion under the deflated measure.
pub fn girsanov_driver_mean(spec: &ModelSpec, tag: FiltrationTag, seed: u64, n_paths: usize) -> Result<MeanEstimate> {
    let rows = exec::try_map_indexed(n_paths, |i| {
        let p = simulate_path(spec, seed, i)?;
        let z = deflator(spec, &p, tag)?;
        let c = &spec.coefficients;
        let mut y = 0.0;
        for k in 0..p.n_steps() {
            for pc in step_pieces(spec, &p, k).as_slice() {
                let v = c.vol(pc.regime, pc.t0, pc.x0);
                y += (c.drift(pc.regime, pc.t0, pc.x0) * pc.h + v * pc.dw) / v;
            }
        }
        Ok((y, z[p.n_steps()]))
    })?;
    let (ys, ws): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    Ok(stats::weighted_mean(&ys, &ws))
}

#[derive(Debug, Clone, Serialize)]
pub struct ShrinkageReport {
    pub larger: FiltrationTag,
    pub smaller: FiltrationTag,
    pub checked: usize,
    /// Paths on which the larger filtration is NA1-stable but the smaller
    /// is not.
    pub violations: usize,
    pub larger_verdict: Na1Verdict,
    pub smaller_verdict: Na1Verdict,
}

/// Shrinking the filtration from `G` to `GX` must not create arbitrage.
pub fn shrinkage_consistency(spec: &ModelSpec, seed: u64, n_paths: usize) -> Result<ShrinkageReport> {
    let (larger, smaller) = (FiltrationTag::G, FiltrationTag::Gx);
    let big = na1_test(spec, larger, seed, n_paths)?;
    let small = na1_test(spec, smaller, seed, n_paths)?;
    let mut checked = 0;
    let mut violations = 0;
    for (a, b) in big.path_stable.iter().zip(&small.path_stable) {
        if let (Some(a), Some(b)) = (a, b) {
            checked += 1;
            if *a && !*b {
                violations += 1;
            }
        }
    }
    Ok(ShrinkageReport {
        larger,
        smaller,
        checked,
        violations,
        larger_verdict: big.verdict,
        smaller_verdict: small.verdict,
    })
}
