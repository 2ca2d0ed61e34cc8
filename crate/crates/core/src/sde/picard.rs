use crate::error::{Error, Result};
use crate::model::path::PathBundle;
use crate::model::scenario::ModelSpec;

/// Outcome of the Picard iteration on one path.
#[derive(Debug, Clone)]
pub struct PicardResult {
    /// `g_k = max_j |X^{k+1}_j - X^k_j|` for `k = 0..k_max`.
    pub gaps: Vec<f64>,
    pub last: Vec<f64>,
    /// Distance of the last iterate from the simulated state.
    pub fixed_point_error: f64,
}

impl PicardResult {
    /// `g_num / g_den`, with `0/0` read as 0.
    pub fn gap_ratio(&self, num: usize, den: usize) -> f64 {
        let (a, b) = (self.gaps[num], self.gaps[den]);
        if b == 0.0 {
            if a == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            a / b
        }
    }
}

/// Normalised driver increments of one step, split at tau for the step that
/// contains it: `dY = dX / sigma`.
struct YStep {
    a: f64,
    /// Post-switch part inside the switch step.
    b: Option<f64>,
}

fn y_increments(spec: &ModelSpec, path: &PathBundle) -> Result<Vec<YStep>> {
    let c = &spec.coefficients;
    let grid = &spec.grid;
    let mut out = Vec::with_capacity(path.n_steps());
    for k in 0..path.n_steps() {
        let t = grid.time(k);
        let xk = path.x[k];
        let step = match path.switch {
            Some(sp) if k == sp.step => YStep {
                a: (sp.x - xk) / c.sigma1.eval(t, xk),
                b: Some((path.x[k + 1] - sp.x) / c.sigma2.eval(sp.time, sp.x)),
            },
            Some(sp) if k > sp.step => YStep { a: (path.x[k + 1] - xk) / c.sigma2.eval(t, xk), b: None },
            _ => YStep { a: (path.x[k + 1] - xk) / c.sigma1.eval(t, xk), b: None },
        };
        if !(step.a.is_finite() && step.b.is_none_or(f64::is_finite)) {
            return Err(Error::InconsistentData(format!("degenerate volatility at step {k}")));
        }
        out.push(step);
    }
    Ok(out)
}

/// Picard iteration `X^{k+1} = int sigma(u, X^k) dY` started from zero, with
/// `Y` the normalised driver read off the simulated path. The simulated state
/// is a fixed point of the discrete map.
pub fn picard_reference(spec: &ModelSpec, path: &PathBundle, k_max: usize) -> Result<PicardResult> {
    if k_max < 1 {
        return Err(Error::invalid("k_max", "need at least one iteration"));
    }
    let c = &spec.coefficients;
    let grid = &spec.grid;
    let dy = y_increments(spec, path)?;
    let n = path.n_steps();
    let mut cur = vec![0.0; n + 1];
    let mut cur_tau = 0.0;
    let mut gaps = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        let mut next = vec![0.0; n + 1];
        let mut next_tau = 0.0;
        for k in 0..n {
            let t = grid.time(k);
            let prev = cur[k];
            next[k + 1] = match (path.switch, &dy[k]) {
                (Some(sp), YStep { a, b: Some(b) }) => {
                    next_tau = next[k] + c.sigma1.eval(t, prev) * a;
                    next_tau + c.sigma2.eval(sp.time, cur_tau) * b
                }
                (Some(sp), YStep { a, .. }) if k > sp.step => next[k] + c.sigma2.eval(t, prev) * a,
                (_, YStep { a, .. }) => next[k] + c.sigma1.eval(t, prev) * a,
            };
        }
        let gap = next.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gaps.push(gap);
        cur = next;
        cur_tau = next_tau;
    }
    let fixed_point_error = cur.iter().zip(&path.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(PicardResult { gaps, last: cur, fixed_point_error })
}
