//! Pipeline stages. Each stage reads the scenario, recomputes whatever
//! paths it needs from the master seed and writes its own files.

use std::fmt;
use std::str::FromStr;

use chgpt_core::arbitrage::{deflated_price_test, na1_test};
use chgpt_core::filtration::detect_switch;
use chgpt_core::hedging::{ablation_gap, fit_hedge, replicate, rmse_ladder, HedgeConfig};
use chgpt_core::model::PathBundle;
use chgpt_core::sde::{node_regime, node_vol, simulate_path, simulate_range};
use chgpt_core::{exec, stats, Error as CoreError};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::output::OutDir;
use crate::scenario::{Scenario, SCHEMA_VERSION};

const TAU_BINS: usize = 20;
/// Paths written per batch to `paths.csv`.
const DUMP_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Detect,
    Arbitrage,
    Hedge,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Simulate, Stage::Detect, Stage::Arbitrage, Stage::Hedge, Stage::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Detect => "detect",
            Stage::Arbitrage => "arbitrage",
            Stage::Hedge => "hedge",
            Stage::Report => "report",
        }
    }

    /// The file whose presence marks the stage as done.
    pub fn marker(self) -> &'static str {
        match self {
            Stage::Simulate => "summary.json",
            Stage::Detect => "detection_summary.json",
            Stage::Arbitrage => "arbitrage.json",
            Stage::Hedge => "hedge_summary.json",
            Stage::Report => "report.md",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// Result of one stage: the verification failures it found, if any.
#[derive(Debug, Default)]
pub struct StageOutcome {
    pub failures: Vec<String>,
}

impl StageOutcome {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

pub fn run_stage(stage: Stage, scenario: &Scenario, out: &OutDir, dump_paths: bool) -> CliResult<StageOutcome> {
    match stage {
        Stage::Simulate => simulate_stage(scenario, out, dump_paths),
        Stage::Detect => detect_stage(scenario, out),
        Stage::Arbitrage => arbitrage_stage(scenario, out),
        Stage::Hedge => hedge_stage(scenario, out),
        Stage::Report => crate::report::report_stage(&scenario.report_context(), out),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub max: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Moments {
            mean: stats::mean(xs),
            sd: stats::variance(xs).sqrt(),
            min,
            q05: stats::quantile(xs, 0.05),
            median: stats::median(xs),
            q95: stats::quantile(xs, 0.95),
            max,
        })
    }
}

struct PathSummary {
    x_t: f64,
    s_t: f64,
    tau: Option<f64>,
    attempts: usize,
}

fn header(scenario: &Scenario) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario.name,
        "fingerprint": scenario.config.fingerprint(),
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn simulate_stage(scenario: &Scenario, out: &OutDir, dump_paths: bool) -> CliResult<StageOutcome> {
    let cfg = &scenario.config;
    let spec = &cfg.model;
    let grid = spec.grid;
    let n = cfg.n_paths;

    let summaries = if dump_paths {
        let mut w = out.csv_writer("paths.csv")?;
        w.write_record(["path_id", "t", "w1", "w2", "x", "s", "v", "regime"])?;
        let mut summaries = Vec::with_capacity(n);
        let mut start = 0;
        while start < n {
            let count = DUMP_CHUNK.min(n - start);
            let batch = simulate_range(spec, cfg.master_seed, start, count)?;
            for p in &batch {
                write_path(&mut w, scenario, p)?;
                summaries.push(summarize(p));
            }
            start += count;
        }
        w.flush().map_err(CliError::io(out.path("paths.csv")))?;
        summaries
    } else {
        exec::try_map_indexed(n, |i| simulate_path(spec, cfg.master_seed, i).map(|p| summarize(&p)))?
    };

    let x_t: Vec<f64> = summaries.iter().map(|s| s.x_t).collect();
    let s_t: Vec<f64> = summaries.iter().map(|s| s.s_t).collect();
    let taus: Vec<f64> = summaries.iter().filter_map(|s| s.tau).collect();
    let attempts: Vec<f64> = summaries.iter().map(|s| s.attempts as f64).collect();
    let horizon = grid.horizon();
    let mut counts = vec![0usize; TAU_BINS];
    for &t in &taus {
        let b = ((t / horizon * TAU_BINS as f64).ceil() as usize).clamp(1, TAU_BINS) - 1;
        counts[b] += 1;
    }
    let edges: Vec<f64> = (0..=TAU_BINS).map(|i| horizon * i as f64 / TAU_BINS as f64).collect();

    let summary = merge(
        header(scenario),
        json!({
            "n_paths": n,
            "n_steps": grid.n_steps(),
            "horizon": horizon,
            "master_seed": cfg.master_seed,
            "x_terminal": Moments::of(&x_t),
            "s_terminal": Moments::of(&s_t),
            "tau": {
                "switched": taus.len(),
                "beyond_horizon": n - taus.len(),
                "moments": Moments::of(&taus),
                "histogram": { "edges": edges, "counts": counts },
            },
            "attempts": { "mean": stats::mean(&attempts), "max": attempts.iter().copied().fold(0.0, f64::max) },
        }),
    );
    out.write_json("summary.json", &summary)?;
    Ok(StageOutcome::default())
}

fn summarize(p: &PathBundle) -> PathSummary {
    let n = p.n_steps();
    PathSummary { x_t: p.x[n], s_t: p.s[n], tau: p.tau().time(), attempts: p.attempts }
}

fn write_path(w: &mut csv::Writer<std::fs::File>, scenario: &Scenario, p: &PathBundle) -> CliResult<()> {
    let spec = &scenario.config.model;
    let n = p.n_steps();
    for k in 0..=n {
        // the last node carries the coefficients of the final step
        let j = k.min(n - 1);
        w.write_record(&[
            p.index.to_string(),
            spec.grid.time(k).to_string(),
            p.w1[k].to_string(),
            p.w2[k].to_string(),
            p.x[k].to_string(),
            p.s[k].to_string(),
            node_vol(spec, p, j).to_string(),
            node_regime(spec, p, j).flag().to_string(),
        ])?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct DetectionRow {
    path_id: usize,
    tau: Option<f64>,
    verdict: &'static str,
    tau_hat: Option<f64>,
    abs_error: Option<f64>,
    margin: Option<f64>,
}

fn detect_stage(scenario: &Scenario, out: &OutDir) -> CliResult<StageOutcome> {
    let cfg = &scenario.config;
    let spec = &cfg.model;
    let det = scenario.detect;
    let rows = exec::try_map_indexed(cfg.n_paths, |i| -> Result<DetectionRow, CoreError> {
        let p = simulate_path(spec, cfg.master_seed, i)?;
        let r = detect_switch(spec, &p.x, det)?;
        let tau = p.tau().time();
        let tau_hat = r.tau_hat();
        let margin = match r {
            chgpt_core::filtration::DetectionResult::Detected { margin, .. } => Some(margin),
            _ => None,
        };
        let abs_error = tau.zip(tau_hat).map(|(a, b)| (a - b).abs());
        Ok(DetectionRow { path_id: i, tau, verdict: r.label(), tau_hat, abs_error, margin })
    })?;

    let mut w = out.csv_writer("detection.csv")?;
    w.write_record(["path_id", "tau", "verdict", "tau_hat", "abs_error", "margin"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        w.write_record(&[
            r.path_id.to_string(),
            opt(r.tau),
            r.verdict.to_string(),
            opt(r.tau_hat),
            opt(r.abs_error),
            opt(r.margin),
        ])?;
    }
    w.flush().map_err(CliError::io(out.path("detection.csv")))?;

    let n = rows.len();
    let count = |label: &str| rows.iter().filter(|r| r.verdict == label).count();
    let verdict_counts = json!({
        "detected": count("detected"),
        "no_switch": count("no_switch"),
        "undetectable": count("undetectable"),
    });
    // first label wins ties, in this order
    let modal = ["detected", "no_switch", "undetectable"]
        .into_iter()
        .fold(("detected", 0), |best, l| if count(l) > best.1 { (l, count(l)) } else { best })
        .0;
    let tolerance = 2.0 * det.window as f64 * spec.grid.dt();
    let errors: Vec<f64> = rows.iter().filter_map(|r| r.abs_error).collect();
    let within = errors.iter().filter(|&&e| e <= tolerance).count();
    let accuracy = if errors.is_empty() { None } else { Some(within as f64 / errors.len() as f64) };
    let no_switch: Vec<&DetectionRow> = rows.iter().filter(|r| r.tau.is_none()).collect();
    let false_positive_rate = if no_switch.is_empty() {
        None
    } else {
        Some(no_switch.iter().filter(|r| r.verdict == "detected").count() as f64 / no_switch.len() as f64)
    };
    let switched = rows.iter().filter(|r| r.tau.is_some()).count();
    let missed = rows.iter().filter(|r| r.tau.is_some() && r.verdict == "no_switch").count();

    let mut outcome = StageOutcome::default();
    let expected = scenario.expected.detection.as_deref();
    if let Some(e) = expected {
        outcome.check(e == modal, || format!("detection: expected modal verdict `{e}`, got `{modal}`"));
    }
    let summary = merge(
        header(scenario),
        json!({
            "n_paths": n,
            "window": det.window,
            "run_length": det.run_length,
            "verdict_counts": verdict_counts,
            "modal_verdict": modal,
            "tolerance": tolerance,
            "accuracy": accuracy,
            "median_abs_error": if errors.is_empty() { None } else { Some(stats::median(&errors)) },
            "switched_paths": switched,
            "missed_paths": missed,
            "false_positive_rate": false_positive_rate,
            "expected": expected,
            "matches_expected": expected.map(|e| e == modal),
        }),
    );
    out.write_json("detection_summary.json", &summary)?;
    Ok(outcome)
}

fn arbitrage_stage(scenario: &Scenario, out: &OutDir) -> CliResult<StageOutcome> {
    let cfg = &scenario.config;
    let spec = &cfg.model;
    let tag = cfg.filtration;
    let na1 = na1_test(spec, tag, cfg.master_seed, cfg.n_paths)?;
    let checkpoints = scenario.checkpoints();
    let deflator = match deflated_price_test(
        spec,
        tag,
        cfg.master_seed,
        cfg.n_paths,
        &checkpoints,
        scenario.arbitrage.confidence,
    ) {
        Ok(r) => json!({
            "status": "accepted",
            "terminal_mean": r.terminal_deflator.mean,
            "terminal_se": r.terminal_deflator.se,
            "terminal_ci3": [r.terminal_deflator.mean - 3.0 * r.terminal_deflator.se,
                             r.terminal_deflator.mean + 3.0 * r.terminal_deflator.se],
            "unbiased": r.deflator_unbiased,
            "martingale": r.martingale,
        }),
        Err(CoreError::ArbitrageDetected(reason)) => json!({ "status": "refused", "reason": reason }),
        Err(CoreError::TooFewPaths { got, min }) => json!({
            "status": "skipped",
            "reason": format!("martingale test needs at least {min} paths, scenario has {got}"),
        }),
        Err(e) => return Err(e.into()),
    };

    let mut outcome = StageOutcome::default();
    let e = &scenario.expected;
    if let Some(v) = e.na1 {
        outcome.check(v == na1.verdict, || {
            format!("na1: expected `{}`, got `{}`", v.as_str(), na1.verdict.as_str())
        });
    }
    let status = deflator["status"].as_str().unwrap_or_default().to_string();
    if let Some(d) = &e.deflator {
        outcome.check(*d == status, || format!("deflator: expected `{d}`, got `{status}`"));
    }
    let martingale = match status.as_str() {
        "accepted" => {
            let m = deflator["martingale"]["passed"].as_bool().unwrap_or(false)
                && deflator["unbiased"].as_bool().unwrap_or(false);
            Some(if m { "pass" } else { "fail" })
        }
        _ => None,
    };
    if let Some(m) = &e.martingale {
        outcome.check(Some(m.as_str()) == martingale, || {
            format!("martingale: expected `{m}`, got `{}`", martingale.unwrap_or("not run"))
        });
    }
    let report = merge(
        header(scenario),
        json!({
            "filtration": tag.as_str(),
            "n_paths": cfg.n_paths,
            "na1": na1,
            "deflator": deflator,
            "martingale_verdict": martingale,
            "checkpoints": checkpoints,
            "expected": {
                "na1": e.na1.map(|v| v.as_str()),
                "deflator": e.deflator,
                "martingale": e.martingale,
            },
        }),
    );
    out.write_json("arbitrage.json", &report)?;
    Ok(outcome)
}

fn hedge_stage(scenario: &Scenario, out: &OutDir) -> CliResult<StageOutcome> {
    let cfg = &scenario.config;
    let spec = &cfg.model;
    let Some(claim) = scenario.claim else {
        out.write_text("hedge.csv", "step,mean_phi,mean_psi,mean_l\n")?;
        let summary = merge(header(scenario), json!({ "status": "skipped", "reason": "scenario has no [claim]" }));
        out.write_json("hedge_summary.json", &summary)?;
        return Ok(StageOutcome::default());
    };
    let hcfg: HedgeConfig = scenario.hedge_config();
    let h = &scenario.hedge;
    let n_train = h.train_paths.unwrap_or(cfg.n_paths);
    let fit = fit_hedge(spec, claim, hcfg, cfg.master_seed, n_train)?;
    let rep = replicate(spec, &fit, cfg.master_seed, h.test_paths)?;

    // the header comes from the field names of StepSummary
    let mut w = out.csv_writer("hedge.csv")?;
    for s in &fit.steps {
        w.serialize(s)?;
    }
    w.flush().map_err(CliError::io(out.path("hedge.csv")))?;

    let ladder = if h.ladder.is_empty() {
        Vec::new()
    } else {
        rmse_ladder(spec, claim, hcfg, cfg.master_seed, &h.ladder, h.test_paths)?
    };
    let ablation = if h.ablation {
        let (with, without, gap) = ablation_gap(spec, claim, hcfg, cfg.master_seed, n_train, h.test_paths)?;
        Some(json!({ "rmse_with_jump": with, "rmse_without_jump": without, "gap": gap }))
    } else {
        None
    };

    let mut outcome = StageOutcome::default();
    if let Some(max) = scenario.expected.hedge_rmse_max {
        outcome.check(rep.rmse <= max, || format!("hedge: rmse {} above {max}", rep.rmse));
    }
    let summary = merge(
        header(scenario),
        json!({
            "status": "fitted",
            "claim": format!("{claim:?}"),
            "filtration": hcfg.tag.as_str(),
            "degree": hcfg.degree,
            "use_jump": hcfg.use_jump,
            "groups": fit.model.groups(),
            "n_train": n_train,
            "v0": fit.v0,
            "replication": rep,
            "ladder": ladder.iter().map(|(m, r)| json!({ "train_paths": m, "rmse": r })).collect::<Vec<_>>(),
            "ablation": ablation,
            "expected_rmse_max": scenario.expected.hedge_rmse_max,
        }),
    );
    out.write_json("hedge_summary.json", &summary)?;
    Ok(outcome)
}
