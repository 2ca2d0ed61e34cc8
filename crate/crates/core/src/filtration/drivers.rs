use crate::error::{Error, Result};
use crate::model::coefficients::Regime;
use crate::model::path::PathBundle;
use crate::model::random_time::compensator;
use crate::model::scenario::ModelSpec;

/// `Y[k+1] = Y[k] + dx_k / v_k` for an observed volatility `v`.
pub fn normalized_driver(x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if v.len() + 1 < x.len() {
        return Err(Error::InconsistentData(format!("{} volatilities for {} increments", v.len(), x.len() - 1)));
    }
    let mut y = Vec::with_capacity(x.len());
    y.push(0.0);
    for k in 0..x.len() - 1 {
        if !(v[k] > 0.0) {
            return Err(Error::InconsistentData(format!("non-positive volatility {} at step {k}", v[k])));
        }
        y.push(y[k] + (x[k + 1] - x[k]) / v[k]);
    }
    Ok(y)
}

/// Normalised driver built from the state path alone, `dY = dX / sigma(t, X)`.
/// Only defined when both regimes share the volatility function.
pub fn y_bar(spec: &ModelSpec, x: &[f64]) -> Result<Vec<f64>> {
    if !spec.coefficients.identical_vol(&spec.lattice()) {
        return Err(Error::UnsupportedScenario("normalised driver needs identical volatility".into()));
    }
    let grid = &spec.grid;
    let v: Vec<f64> =
        (0..x.len() - 1).map(|k| spec.coefficients.vol(Regime::Pre, grid.time(k), x[k])).collect();
    normalized_driver(x, &v)
}

/// Inverse of [`y_bar`]: rebuilds the state from the normalised driver.
pub fn reconstruct_state(spec: &ModelSpec, y: &[f64]) -> Result<Vec<f64>> {
    if !spec.coefficients.identical_vol(&spec.lattice()) {
        return Err(Error::UnsupportedScenario("reconstruction needs identical volatility".into()));
    }
    let grid = &spec.grid;
    let mut x = Vec::with_capacity(y.len());
    x.push(0.0);
    for k in 0..y.len() - 1 {
        let v = spec.coefficients.vol(Regime::Pre, grid.time(k), x[k]);
        x.push(x[k] + v * (y[k + 1] - y[k]));
    }
    Ok(x)
}

/// `m_t = 1{tau <= t} - A_t` on the grid.
pub fn jump_martingale(spec: &ModelSpec, path: &PathBundle) -> Result<Vec<f64>> {
    let tau = path.tau();
    let a = compensator(&spec.tau, tau, &spec.grid, &path.w1, &path.x)?;
    Ok(a.iter()
        .enumerate()
        .map(|(k, ak)| if tau.occurred_by(spec.grid.time(k)) { 1.0 - ak } else { -ak })
        .collect())
}
