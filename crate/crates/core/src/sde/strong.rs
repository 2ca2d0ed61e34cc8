use crate::error::{Error, Result};
use crate::exec;
use crate::model::grid::TimeGrid;
use crate::model::scenario::ModelSpec;
use crate::rng::PathRng;
use crate::sde::simulate::{bridge_at_tau, draw, evolve};
use crate::stats;

/// RMS terminal error of one level against the finest level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelError {
    pub n_steps: usize,
    pub dt: f64,
    pub rms: f64,
}

#[derive(Debug, Clone)]
pub struct StrongErrorReport {
    pub levels: Vec<LevelError>,
    /// OLS slope of `log rms` against `log dt`.
    pub slope: f64,
}

/// Strong convergence of the terminal state.
///
/// Every path draws Brownian increments on the finest grid of the ladder
/// (`spec.grid` horizon, `fine_steps` steps); coarser levels aggregate them.
/// The change point is drawn once on the finest grid, and each level bridges
/// the driver at tau with its own normals. Errors are measured against the
/// finest level, which is excluded from the regression.
pub fn strong_error_study(spec: &ModelSpec, seed: u64, n_paths: usize, ladder: &[usize]) -> Result<StrongErrorReport> {
    if ladder.len() < 3 {
        return Err(Error::invalid("ladder", format!("need at least 3 levels, got {}", ladder.len())));
    }
    spec.validate_parameters()?;
    let fine = *ladder.iter().max().unwrap_or(&1);
    let coarse: Vec<usize> = ladder.iter().copied().filter(|&n| n != fine).collect();
    for &n in &coarse {
        if n == 0 || !fine.is_multiple_of(n) {
            return Err(Error::invalid("ladder", format!("{n} does not divide the finest level {fine}")));
        }
    }
    if n_paths < 2 {
        return Err(Error::TooFewPaths { got: n_paths, min: 2 });
    }
    let horizon = spec.grid.horizon();
    let fine_grid = TimeGrid::new(horizon, fine)?;
    let grids: Vec<TimeGrid> = coarse.iter().map(|&n| TimeGrid::new(horizon, n)).collect::<Result<_>>()?;

    let per_path: Vec<Vec<f64>> = exec::try_map_indexed(n_paths, |i| {
        let mut rng = PathRng::new(seed, i as u64);
        let d = draw(spec, &fine_grid, &mut rng, i)?;
        let terminal = |grid: &TimeGrid, rng: &mut PathRng| -> Result<f64> {
            let stride = fine / grid.n_steps();
            let w1: Vec<f64> = d.w1.iter().step_by(stride).copied().collect();
            let w2: Vec<f64> = d.w2.iter().step_by(stride).copied().collect();
            let xi = (rng.normal(), rng.normal());
            let at_tau = d.tau.time().map(|tau| {
                let (k, b1, b2) = bridge_at_tau(spec, grid, &w1, &w2, tau, xi);
                (tau, k, b1, b2)
            });
            let (x, _, _) = evolve(spec, grid, &w1, &w2, at_tau, i)?;
            Ok(x[grid.n_steps()])
        };
        let reference = terminal(&fine_grid, &mut rng)?;
        grids.iter().map(|g| Ok((terminal(g, &mut rng)? - reference).powi(2))).collect()
    })?;

    let mut levels = Vec::with_capacity(grids.len());
    for (j, g) in grids.iter().enumerate() {
        let sq: Vec<f64> = per_path.iter().map(|v| v[j]).collect();
        levels.push(LevelError { n_steps: g.n_steps(), dt: g.dt(), rms: stats::mean(&sq).sqrt() });
    }
    let xs: Vec<f64> = levels.iter().map(|l| l.dt.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.rms.max(f64::MIN_POSITIVE).ln()).collect();
    let slope = stats::ols_slope(&xs, &ys);
    Ok(StrongErrorReport { levels, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coefficients::RegimeCoefficients;
    use crate::model::random_time::RandomTimeSpec;

    fn spec() -> ModelSpec {
        ModelSpec::new(
            TimeGrid::new(1.0, 64).unwrap(),
            RegimeCoefficients::constant(0.0, 0.0, 0.2, 0.4),
            RandomTimeSpec::Deterministic { t0: 0.5 },
        )
    }

    #[test]
    fn short_ladder_rejected() {
        assert!(strong_error_study(&spec(), 0, 10, &[8, 16]).is_err());
        assert!(strong_error_study(&spec(), 0, 10, &[8, 24, 64]).is_err());
    }

    #[test]
    fn exact_scheme_has_zero_error_on_grid_switch() {
        // constant coefficients and tau on every grid node: Euler is exact
        let r = strong_error_study(&spec(), 0, 20, &[8, 16, 32, 64]).unwrap();
        assert!(r.levels.iter().all(|l| l.rms < 1e-12));
    }
}
