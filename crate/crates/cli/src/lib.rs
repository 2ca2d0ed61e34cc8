//! Command-line pipeline around `chgpt-core`: scenario files in, reports out.

pub mod error;
pub mod manifest;
pub mod output;
pub mod report;
pub mod scenario;
pub mod stages;

use std::path::PathBuf;
use std::time::Instant;

pub use error::{CliError, CliResult};
use manifest::{Manifest, StageRecord};
use output::OutDir;
use scenario::Overrides;
use stages::Stage;

#[derive(Debug, Clone)]
pub struct RunRequest {
    /// Optional for a report-only run, which reads the manifest instead.
    pub scenario: Option<PathBuf>,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub stages: Vec<Stage>,
    pub dump_paths: bool,
    /// Recorded in the manifest only.
    pub workers: usize,
}

/// Runs the requested stages in order. Verification failures do not stop
/// later stages; they are collected and returned as one error at the end.
pub fn run(req: &RunRequest) -> CliResult<()> {
    let Some(path) = &req.scenario else {
        if req.stages != [Stage::Report] {
            return Err(CliError::Schema("--scenario is required for every stage except report".into()));
        }
        return run_report_only(req);
    };
    let scenario = scenario::load(path, req.overrides)?;
    let out = OutDir::create(&req.out)?;
    let mut manifest = Manifest::open(&out, path, &scenario, req.workers)?;
    manifest.write(&out)?;

    let mut failures = Vec::new();
    for &stage in &req.stages {
        let start = Instant::now();
        let result = stages::run_stage(stage, &scenario, &out, req.dump_paths);
        let seconds = start.elapsed().as_secs_f64();
        let (status, messages) = match &result {
            Ok(o) if o.failures.is_empty() => ("ok", Vec::new()),
            Ok(o) => ("verification_failed", o.failures.clone()),
            Err(e) => ("error", vec![e.to_string()]),
        };
        manifest.record(StageRecord {
            stage: stage.as_str().into(),
            status: status.into(),
            wall_clock_seconds: seconds,
            messages,
        });
        manifest.write(&out)?;
        failures.extend(result?.failures);
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join("; ")))
    }
}

fn run_report_only(req: &RunRequest) -> CliResult<()> {
    let out = OutDir::create(&req.out)?;
    if !out.exists("manifest.json") {
        return Err(CliError::MissingStages(vec!["manifest.json".into()]));
    }
    let mut manifest = Manifest::load(&out)?;
    let start = Instant::now();
    let result = report::report_stage(&manifest.report_context(), &out);
    manifest.record(StageRecord {
        stage: Stage::Report.as_str().into(),
        status: if result.is_ok() { "ok" } else { "error" }.into(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        messages: result.as_ref().err().map(|e| vec![e.to_string()]).unwrap_or_default(),
    });
    manifest.write(&out)?;
    result.map(|_| ())
}
