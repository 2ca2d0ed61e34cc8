//! Markdown report and plot-ready CSVs assembled from the stage outputs.

use std::fmt::Write as _;

use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::output::OutDir;
use crate::stages::{Stage, StageOutcome};

/// What the report needs to know about the run, taken from the scenario or
/// from an existing manifest.
#[derive(Debug, Clone)]
pub struct ReportContext {
    pub name: String,
    pub description: String,
    pub model: String,
    pub fingerprint: String,
}

pub fn report_stage(ctx: &ReportContext, out: &OutDir) -> CliResult<StageOutcome> {
    let needed = [Stage::Simulate, Stage::Detect, Stage::Arbitrage, Stage::Hedge];
    let missing: Vec<String> =
        needed.iter().filter(|s| !out.exists(s.marker())).map(|s| format!("{s} ({})", s.marker())).collect();
    if !missing.is_empty() {
        return Err(CliError::MissingStages(missing));
    }
    let summary = out.read_json("summary.json")?;
    let detection = out.read_json("detection_summary.json")?;
    let arbitrage = out.read_json("arbitrage.json")?;
    let hedge = out.read_json("hedge_summary.json")?;
    let fingerprint = &ctx.fingerprint;
    let stale: Vec<String> = [
        ("summary.json", &summary),
        ("detection_summary.json", &detection),
        ("arbitrage.json", &arbitrage),
        ("hedge_summary.json", &hedge),
    ]
    .into_iter()
    .filter(|(_, v)| v["fingerprint"].as_str() != Some(fingerprint.as_str()))
    .map(|(n, _)| format!("{n} (written for a different configuration)"))
    .collect();
    if !stale.is_empty() {
        return Err(CliError::MissingStages(stale));
    }

    write_tau_histogram(out, &summary)?;
    write_na1_ladder(out, &arbitrage)?;

    let mut md = String::new();
    let txt = |v: &Value| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
    let num = |v: &Value| v.as_f64().map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into());
    let _ = writeln!(md, "# {}\n", ctx.name);
    if !ctx.description.is_empty() {
        let _ = writeln!(md, "{}\n", ctx.description);
    }
    let _ = writeln!(md, "- fingerprint: `{fingerprint}`");
    let _ = writeln!(md, "- model: {}", ctx.model);
    let _ = writeln!(md, "- paths: {}, steps: {}\n", summary["n_paths"], summary["n_steps"]);

    let _ = writeln!(md, "## Simulation\n");
    let _ = writeln!(md, "| quantity | mean | sd | q05 | median | q95 |\n|---|---|---|---|---|---|");
    for (label, key) in [("X_T", "x_terminal"), ("S_T", "s_terminal")] {
        let m = &summary[key];
        let _ = writeln!(
            md,
            "| {label} | {} | {} | {} | {} | {} |",
            num(&m["mean"]),
            num(&m["sd"]),
            num(&m["q05"]),
            num(&m["median"]),
            num(&m["q95"])
        );
    }
    let tau = &summary["tau"];
    let _ = writeln!(
        md,
        "\nSwitched within the horizon: {} paths; beyond: {}. Histogram in `tau_histogram.csv`.\n",
        tau["switched"], tau["beyond_horizon"]
    );

    let _ = writeln!(md, "## Detection\n");
    let _ = writeln!(
        md,
        "- window {} increments, run length {}\n- verdicts: {}\n- modal verdict: {}\n- share within {} of tau: {}\n- false positive rate: {}\n",
        detection["window"],
        detection["run_length"],
        detection["verdict_counts"],
        txt(&detection["modal_verdict"]),
        num(&detection["tolerance"]),
        num(&detection["accuracy"]),
        num(&detection["false_positive_rate"]),
    );

    let _ = writeln!(md, "## Arbitrage\n");
    let na1 = &arbitrage["na1"];
    let _ = writeln!(md, "- filtration: {}", txt(&arbitrage["filtration"]));
    let _ = writeln!(md, "- NA1 verdict: {} (ladder in `na1_ladder.csv`)", txt(&na1["verdict"]));
    let _ = writeln!(md, "- stable fraction: {}, excluded paths: {}", num(&na1["stable_fraction"]), na1["excluded"]);
    let d = &arbitrage["deflator"];
    match d["status"].as_str() {
        Some("accepted") => {
            let _ = writeln!(
                md,
                "- deflator: E[Z_T] = {} (se {}), martingale verdict: {}\n",
                num(&d["terminal_mean"]),
                num(&d["terminal_se"]),
                txt(&arbitrage["martingale_verdict"])
            );
        }
        _ => {
            let _ = writeln!(md, "- deflator {}: {}\n", txt(&d["status"]), txt(&d["reason"]));
        }
    }

    let _ = writeln!(md, "## Hedging\n");
    if hedge["status"] == "fitted" {
        let rep = &hedge["replication"];
        let _ = writeln!(
            md,
            "- claim: {}\n- v0 by information group: {}\n- out-of-sample RMSE: {} over {} paths",
            txt(&hedge["claim"]), hedge["v0"], num(&rep["rmse"]), rep["n_paths"]
        );
        if let Some(ladder) = hedge["ladder"].as_array().filter(|l| !l.is_empty()) {
            let _ = writeln!(md, "\n| training paths | RMSE |\n|---|---|");
            for row in ladder {
                let _ = writeln!(md, "| {} | {} |", row["train_paths"], num(&row["rmse"]));
            }
        }
        if !hedge["ablation"].is_null() {
            let a = &hedge["ablation"];
            let _ = writeln!(
                md,
                "\nWithout the jump position the RMSE moves from {} to {} (relative gap {}).",
                num(&a["rmse_with_jump"]),
                num(&a["rmse_without_jump"]),
                num(&a["gap"])
            );
        }
        let _ = writeln!(md, "\nMean positions per step in `hedge.csv`.");
    } else {
        let _ = writeln!(md, "Skipped: {}", txt(&hedge["reason"]));
    }

    out.write_text("report.md", &md)?;
    Ok(StageOutcome::default())
}

fn write_tau_histogram(out: &OutDir, summary: &Value) -> CliResult<()> {
    let h = &summary["tau"]["histogram"];
    let edges: Vec<f64> = h["edges"].as_array().into_iter().flatten().filter_map(Value::as_f64).collect();
    let counts: Vec<u64> = h["counts"].as_array().into_iter().flatten().filter_map(Value::as_u64).collect();
    let mut w = out.csv_writer("tau_histogram.csv")?;
    w.write_record(["lo", "hi", "count"])?;
    for (i, c) in counts.iter().enumerate() {
        if i + 1 < edges.len() {
            w.write_record(&[edges[i].to_string(), edges[i + 1].to_string(), c.to_string()])?;
        }
    }
    w.flush().map_err(CliError::io(out.path("tau_histogram.csv")))
}

fn write_na1_ladder(out: &OutDir, arbitrage: &Value) -> CliResult<()> {
    let na1 = &arbitrage["na1"];
    let eps: Vec<f64> = na1["eps"].as_array().into_iter().flatten().filter_map(Value::as_f64).collect();
    let med: Vec<f64> = na1["median_energy"].as_array().into_iter().flatten().filter_map(Value::as_f64).collect();
    let mut w = out.csv_writer("na1_ladder.csv")?;
    w.write_record(["eps", "median_energy"])?;
    for (e, m) in eps.iter().zip(&med) {
        w.write_record(&[e.to_string(), m.to_string()])?;
    }
    w.flush().map_err(CliError::io(out.path("na1_ladder.csv")))
}
