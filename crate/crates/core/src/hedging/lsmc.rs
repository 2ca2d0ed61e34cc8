use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::filtration::jump_martingale;
use crate::model::path::PathBundle;
use crate::model::scenario::{FiltrationTag, ModelSpec};
use crate::sde::{node_vol, simulate_path};
use crate::stats;

use super::claim::Claim;
use crate::arbitrage::deflator;

/// A group with fewer paths than this many per regression column borrows
/// the fit pooled over the groups of its regime.
const MIN_GROUP_PATHS_PER_COLUMN: usize = 4;

/// Smallest admissible number of polynomial basis functions.
pub const MIN_BASIS: usize = 3;

/// First path index of out-of-sample sets, far from any training range.
const TEST_OFFSET: usize = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeConfig {
    pub tag: FiltrationTag,
    /// Polynomial degree in the standardised state.
    pub degree: usize,
    /// Hold the jump martingale of the regime indicator as a second asset.
    pub use_jump: bool,
    /// Number of quantile buckets of tau for the filtrations that know it.
    pub tau_buckets: usize,
}

impl HedgeConfig {
    pub fn new(tag: FiltrationTag) -> Self {
        HedgeConfig { tag, degree: 3, use_jump: true, tau_buckets: 10 }
    }

    fn basis_size(&self) -> usize {
        self.degree + 1
    }
}

/// Per-step fitted coefficients, one block per information group.
#[derive(Debug, Clone)]
struct StepFit {
    mean: f64,
    scale: f64,
    value: Vec<DVector<f64>>,
    delta: Vec<DVector<f64>>,
    jump: Option<Vec<DVector<f64>>>,
}

#[derive(Debug, Clone)]
pub struct HedgeModel {
    pub config: HedgeConfig,
    pub claim: Claim,
    /// Upper quantile edges of tau used to bucket paths.
    pub tau_edges: Vec<f64>,
    steps: Vec<StepFit>,
    groups: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepSummary {
    pub step: usize,
    /// Mean exposure to the driver, `h S sigma`.
    pub mean_phi: f64,
    pub mean_psi: f64,
    pub mean_l: f64,
}

#[derive(Debug, Clone)]
pub struct HedgeFit {
    pub model: HedgeModel,
    pub steps: Vec<StepSummary>,
    /// Initial capital per information group at time zero.
    pub v0: Vec<f64>,
    pub n_train: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub n_paths: usize,
    /// Evaluated on the training paths themselves.
    pub in_sample: bool,
    pub rmse: f64,
    pub mean_error: f64,
}

/// Per-path data, stored step-major once collected.
struct PathRow {
    x: Vec<f64>,
    s: Vec<f64>,
    vol: Vec<f64>,
    dm: Option<Vec<f64>>,
    regime: Vec<u8>,
    tau: Option<f64>,
    payoff: f64,
    weight: f64,
}

fn path_row(spec: &ModelSpec, claim: &Claim, cfg: &HedgeConfig, p: &PathBundle, with_weight: bool) -> Result<PathRow> {
    let n = p.n_steps();
    let weight = if with_weight { deflator(spec, p, cfg.tag)?[n] } else { 1.0 };
    let dm = if cfg.use_jump {
        let m = jump_martingale(spec, p)?;
        Some(m.windows(2).map(|w| w[1] - w[0]).collect())
    } else {
        None
    };
    Ok(PathRow {
        vol: (0..n).map(|k| node_vol(spec, p, k)).collect(),
        regime: (0..=n).map(|k| p.regime_at(k, &spec.grid).flag()).collect(),
        x: p.x.clone(),
        s: p.s.clone(),
        dm,
        tau: p.tau().time(),
        payoff: claim.payoff(p),
        weight,
    })
}

fn group_count(spec: &ModelSpec, cfg: &HedgeConfig) -> usize {
    match cfg.tag {
        FiltrationTag::Fx if spec.coefficients.identical_vol(&spec.lattice()) => 1,
        FiltrationTag::Fx => 2,
        // pre-switch, then one group per tau bucket once tau is revealed
        FiltrationTag::G | FiltrationTag::Gx => 1 + cfg.tau_buckets,
        FiltrationTag::GTau | FiltrationTag::GxTau => 2 * (cfg.tau_buckets + 1),
    }
}

fn bucket(edges: &[f64], tau: Option<f64>) -> usize {
    match tau {
        None => edges.len(),
        Some(t) => edges.iter().position(|&e| t <= e).unwrap_or(edges.len() - 1),
    }
}

fn group_of(tag: FiltrationTag, model_groups: usize, edges: &[f64], row: &PathRow, k: usize) -> usize {
    let post = row.regime[k] as usize;
    match tag {
        _ if model_groups == 1 => 0,
        FiltrationTag::Fx => post,
        FiltrationTag::G | FiltrationTag::Gx => {
            if post == 0 {
                0
            } else {
                1 + bucket(edges, row.tau)
            }
        }
        FiltrationTag::GTau | FiltrationTag::GxTau => 2 * bucket(edges, row.tau) + post,
    }
}

/// Probabilists' Hermite polynomials `He_0..He_{nb-1}` at `z`. They are
/// orthogonal for a standard normal state, which keeps the normal
/// equations well conditioned at higher degree than plain monomials.
fn basis(z: f64, nb: usize, out: &mut [f64]) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for (j, o) in out.iter_mut().take(nb).enumerate() {
        *o = cur;
        let next = z * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
}

#[derive(Clone)]
struct Normal {
    xtx: Vec<DMatrix<f64>>,
    xty: Vec<DVector<f64>>,
    count: Vec<usize>,
}

impl Normal {
    fn new(groups: usize, cols: usize) -> Self {
        Normal {
            xtx: vec![DMatrix::zeros(cols, cols); groups],
            xty: vec![DVector::zeros(cols); groups],
            count: vec![0; groups],
        }
    }

    fn merge(mut self, other: Normal) -> Normal {
        for g in 0..self.xtx.len() {
            self.xtx[g] += &other.xtx[g];
            self.xty[g] += &other.xty[g];
            self.count[g] += other.count[g];
        }
        self
    }

    /// Sum of the equations of `members`.
    fn pooled(&self, members: impl Iterator<Item = usize>) -> (DMatrix<f64>, DVector<f64>) {
        let cols = self.xty[0].len();
        let mut a = DMatrix::zeros(cols, cols);
        let mut b = DVector::zeros(cols);
        for g in members {
            a += &self.xtx[g];
            b += &self.xty[g];
        }
        (a, b)
    }
}

/// Groups whose pooled fit stands in for `g` when `g` has too few paths:
/// the other groups that share its regime, or `None` when `g` already
/// pools everything it can.
fn pool_of(tag: FiltrationTag, groups: usize, g: usize) -> Option<Vec<usize>> {
    match tag {
        _ if groups <= 2 => None,
        FiltrationTag::G | FiltrationTag::Gx if g > 0 => Some((1..groups).collect()),
        FiltrationTag::GTau | FiltrationTag::GxTau => Some((g % 2..groups).step_by(2).collect()),
        _ => None,
    }
}

fn solve(xtx: &DMatrix<f64>, xty: &DVector<f64>) -> DVector<f64> {
    let svd = xtx.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DVector::zeros(xty.len());
    }
    svd.solve(xty, smax * 1e-12).unwrap_or_else(|_| DVector::zeros(xty.len()))
}

impl HedgeModel {
    fn n_steps(&self) -> usize {
        self.steps.len()
    }

    fn features(&self, k: usize, x: f64, out: &mut [f64]) {
        let st = &self.steps[k];
        basis((x - st.mean) / st.scale, self.config.basis_size(), out);
    }

    /// Fitted value, stock position and jump position at step `k` for a
    /// path in information group `group` at state `x`.
    pub fn position(&self, k: usize, group: usize, x: f64) -> (f64, f64, f64) {
        self.evaluate(k, group.min(self.groups - 1), x)
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    fn evaluate(&self, k: usize, group: usize, x: f64) -> (f64, f64, f64) {
        let nb = self.config.basis_size();
        let mut b = [0.0; 16];
        self.features(k, x, &mut b[..nb]);
        let st = &self.steps[k];
        let dot = |v: &DVector<f64>| (0..nb).map(|i| v[i] * b[i]).sum::<f64>();
        let l = dot(&st.value[group]);
        let h = dot(&st.delta[group]);
        let psi = st.jump.as_ref().map_or(0.0, |j| dot(&j[group]));
        (l, h, psi)
    }
}

/// Fits the hedge backwards in time on `n_train` paths.
///
/// At each step the fitted claim value at the next node is regressed jointly
/// on `b`, `b dS` and (optionally) `b dM` under deflator weights, where `b`
/// are polynomials in the standardised state crossed with the information
/// group (regime indicator, and tau bucket when tau is known).
pub fn fit_hedge(spec: &ModelSpec, claim: Claim, cfg: HedgeConfig, seed: u64, n_train: usize) -> Result<HedgeFit> {
    let nb = cfg.basis_size();
    if !(MIN_BASIS..=16).contains(&nb) {
        return Err(Error::invalid("degree", format!("basis size must lie in [{MIN_BASIS}, 16], got {nb}")));
    }
    if cfg.tau_buckets == 0 {
        return Err(Error::invalid("tau_buckets", "need at least one bucket"));
    }
    if n_train < 10 {
        return Err(Error::TooFewPaths { got: n_train, min: 10 });
    }
    if cfg.use_jump && cfg.tag.knows_tau() {
        return Err(Error::UnsupportedScenario(format!(
            "the regime indicator is predictable under {}; no jump martingale to hold",
            cfg.tag
        )));
    }
    spec.validate_parameters()?;
    crate::arbitrage::check_support(spec, cfg.tag)?;
    let rows = exec::try_map_indexed(n_train, |i| {
        let p = simulate_path(spec, seed, i)?;
        path_row(spec, &claim, &cfg, &p, true)
    })?;
    let n = spec.grid.n_steps();
    let groups = group_count(spec, &cfg);
    let tau_edges = if !matches!(cfg.tag, FiltrationTag::Fx) {
        let mut taus: Vec<f64> = rows.iter().filter_map(|r| r.tau).collect();
        taus.sort_by(f64::total_cmp);
        if taus.is_empty() {
            vec![f64::INFINITY; cfg.tau_buckets]
        } else {
            (1..=cfg.tau_buckets).map(|q| stats::quantile(&taus, q as f64 / cfg.tau_buckets as f64)).collect()
        }
    } else {
        Vec::new()
    };
    let mut model = HedgeModel { config: cfg, claim, tau_edges, steps: Vec::with_capacity(n), groups };
    // standardisation of the state per step
    for k in 0..n {
        let xs: Vec<f64> = rows.iter().map(|r| r.x[k]).collect();
        let mean = stats::mean(&xs);
        let sd = stats::variance(&xs).sqrt();
        let scale = if sd > 1e-12 { sd } else { 1.0 };
        model.steps.push(StepFit { mean, scale, value: Vec::new(), delta: Vec::new(), jump: None });
    }
    let cols = nb * if cfg.use_jump { 3 } else { 2 };
    let mut target: Vec<f64> = rows.iter().map(|r| r.payoff).collect();
    let mut summaries = vec![None; n];
    for k in (0..n).rev() {
        let m = &model;
        let t = &target;
        let normal = exec::chunked_fold(
            rows.len(),
            exec::DEFAULT_CHUNK,
            || Normal::new(groups, cols),
            |acc, i| {
                let r = &rows[i];
                let g = group_of(cfg.tag, groups, &m.tau_edges, r, k);
                let mut f = [0.0; 48];
                m.features(k, r.x[k], &mut f[..nb]);
                let ds = r.s[k + 1] - r.s[k];
                for j in 0..nb {
                    f[nb + j] = f[j] * ds;
                }
                if let Some(dm) = &r.dm {
                    for j in 0..nb {
                        f[2 * nb + j] = f[j] * dm[k];
                    }
                }
                let w = r.weight;
                acc.count[g] += 1;
                let xtx = &mut acc.xtx[g];
                for a in 0..cols {
                    let wa = w * f[a];
                    if wa == 0.0 {
                        continue;
                    }
                    for b in 0..cols {
                        xtx[(a, b)] += wa * f[b];
                    }
                    acc.xty[g][a] += wa * t[i];
                }
            },
            Normal::merge,
        );
        let mut value = Vec::with_capacity(groups);
        let mut delta = Vec::with_capacity(groups);
        let mut jump = Vec::with_capacity(groups);
        for g in 0..groups {
            let beta = match pool_of(cfg.tag, groups, g) {
                Some(members) if normal.count[g] < MIN_GROUP_PATHS_PER_COLUMN * cols => {
                    let (a, b) = normal.pooled(members.into_iter());
                    solve(&a, &b)
                }
                _ => solve(&normal.xtx[g], &normal.xty[g]),
            };
            value.push(beta.rows(0, nb).into_owned());
            delta.push(beta.rows(nb, nb).into_owned());
            if cfg.use_jump {
                jump.push(beta.rows(2 * nb, nb).into_owned());
            }
        }
        let st = &mut model.steps[k];
        st.value = value;
        st.delta = delta;
        st.jump = cfg.use_jump.then_some(jump);
        let m = &model;
        let evals: Vec<(f64, f64, f64)> = exec::map_indexed(rows.len(), |i| {
            let r = &rows[i];
            let (l, h, psi) = m.evaluate(k, group_of(cfg.tag, groups, &m.tau_edges, r, k), r.x[k]);
            (l, h * r.s[k] * r.vol[k], psi)
        });
        summaries[k] = Some(StepSummary {
            step: k,
            mean_phi: stats::mean(&evals.iter().map(|e| e.1).collect::<Vec<_>>()),
            mean_psi: stats::mean(&evals.iter().map(|e| e.2).collect::<Vec<_>>()),
            mean_l: stats::mean(&evals.iter().map(|e| e.0).collect::<Vec<_>>()),
        });
        target = evals.into_iter().map(|e| e.0).collect();
    }
    let v0 = (0..groups).map(|g| model.evaluate(0, g, 0.0).0).collect();
    Ok(HedgeFit { model, steps: summaries.into_iter().flatten().collect(), v0, n_train })
}

/// Runs the fitted hedge on `n_test` fresh paths and reports the terminal
/// replication error `v0 + sum h dS + sum psi dM - payoff`.
pub fn replicate(spec: &ModelSpec, fit: &HedgeFit, seed: u64, n_test: usize) -> Result<ReplicationReport> {
    replicate_on(spec, fit, seed, TEST_OFFSET, n_test)
}

/// As [`replicate`] on paths `start..start + count`; overlap with the
/// training range is reported as in-sample.
pub fn replicate_on(spec: &ModelSpec, fit: &HedgeFit, seed: u64, start: usize, count: usize) -> Result<ReplicationReport> {
    if count == 0 {
        return Err(Error::TooFewPaths { got: 0, min: 1 });
    }
    let model = &fit.model;
    let cfg = model.config;
    let n = model.n_steps();
    if n != spec.grid.n_steps() {
        return Err(Error::InconsistentData(format!("hedge fitted on {n} steps, grid has {}", spec.grid.n_steps())));
    }
    let errors = exec::try_map_indexed(count, |i| {
        let p = simulate_path(spec, seed, start + i)?;
        let r = path_row(spec, &model.claim, &cfg, &p, false)?;
        let mut wealth = model.evaluate(0, group_of(model.config.tag, model.groups, &model.tau_edges, &r, 0), r.x[0]).0;
        for k in 0..n {
            let g = group_of(model.config.tag, model.groups, &model.tau_edges, &r, k);
            let (_, h, psi) = model.evaluate(k, g, r.x[k]);
            wealth += h * (r.s[k + 1] - r.s[k]);
            if let Some(dm) = &r.dm {
                wealth += psi * dm[k];
            }
        }
        Ok(wealth - r.payoff)
    })?;
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    Ok(ReplicationReport {
        n_paths: count,
        in_sample: start < fit.n_train,
        rmse: stats::mean(&sq).sqrt(),
        mean_error: stats::mean(&errors),
    })
}

/// Out-of-sample RMSE for each training size.
pub fn rmse_ladder(
    spec: &ModelSpec,
    claim: Claim,
    cfg: HedgeConfig,
    seed: u64,
    sizes: &[usize],
    n_test: usize,
) -> Result<Vec<(usize, f64)>> {
    sizes
        .iter()
        .map(|&m| {
            let fit = fit_hedge(spec, claim, cfg, seed, m)?;
            Ok((m, replicate(spec, &fit, seed, n_test)?.rmse))
        })
        .collect()
}

/// Relative RMSE change when the jump position is dropped:
/// `(rmse_without - rmse_with) / rmse_with`.
pub fn ablation_gap(
    spec: &ModelSpec,
    claim: Claim,
    cfg: HedgeConfig,
    seed: u64,
    n_train: usize,
    n_test: usize,
) -> Result<(f64, f64, f64)> {
    let with = fit_hedge(spec, claim, HedgeConfig { use_jump: true, ..cfg }, seed, n_train)?;
    let without = fit_hedge(spec, claim, HedgeConfig { use_jump: false, ..cfg }, seed, n_train)?;
    let a = replicate(spec, &with, seed, n_test)?.rmse;
    let b = replicate(spec, &without, seed, n_test)?.rmse;
    Ok((a, b, (b - a) / a))
}

/// One line of the completeness table.
#[derive(Debug, Clone, Serialize)]
pub struct CompletenessRow {
    pub name: String,
    pub identical_vol: bool,
    pub rmse_with_jump: f64,
    pub rmse_without_jump: f64,
    pub gap: f64,
    /// Identical volatility: gap below 10%. Distinct volatility: the
    /// Brownian-only hedge is worse by at least `min_gap`.
    pub as_expected: bool,
}

/// Replication RMSE with and without the jump position for each scenario.
pub fn completeness_report(
    cases: &[(String, ModelSpec, Claim, HedgeConfig)],
    seed: u64,
    n_train: usize,
    n_test: usize,
    min_gap: f64,
) -> Result<Vec<CompletenessRow>> {
    cases
        .iter()
        .map(|(name, spec, claim, cfg)| {
            let (with, without, gap) = ablation_gap(spec, *claim, *cfg, seed, n_train, n_test)?;
            let identical_vol = spec.coefficients.identical_vol(&spec.lattice());
            let as_expected = if identical_vol { gap.abs() < 0.1 } else { gap >= min_gap };
            Ok(CompletenessRow {
                name: name.clone(),
                identical_vol,
                rmse_with_jump: with,
                rmse_without_jump: without,
                gap,
                as_expected,
            })
        })
        .collect()
}
