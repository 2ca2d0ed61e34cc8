//! `manifest.json`: what was run, with which configuration, and how long
//! each stage took. Timings live here so the other outputs stay
//! reproducible byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliResult;
use crate::output::OutDir;
use crate::report::ReportContext;
use crate::scenario::{Scenario, SCHEMA_VERSION};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// `ok`, `verification_failed` or `error`.
    pub status: String,
    pub wall_clock_seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versions {
    pub chgpt_core: String,
    pub chgpt: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scenario_file: String,
    pub scenario_name: String,
    #[serde(default)]
    pub description: String,
    pub model: String,
    pub fingerprint: String,
    pub master_seed: u64,
    pub workers: usize,
    pub out_dir: String,
    pub versions: Versions,
    pub resolved_config: serde_json::Value,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    /// Starts a manifest, keeping the stage records of an earlier run in the
    /// same directory when it used the same configuration.
    pub fn open(out: &OutDir, scenario_file: &Path, scenario: &Scenario, workers: usize) -> CliResult<Self> {
        let fingerprint = scenario.config.fingerprint();
        let previous = if out.exists("manifest.json") {
            out.read_json("manifest.json").ok().and_then(|v| serde_json::from_value::<Manifest>(v).ok())
        } else {
            None
        };
        let stages = previous.filter(|m| m.fingerprint == fingerprint).map(|m| m.stages).unwrap_or_default();
        Ok(Manifest {
            schema_version: SCHEMA_VERSION,
            scenario_file: scenario_file.display().to_string(),
            scenario_name: scenario.name.clone(),
            description: scenario.description.clone(),
            model: scenario.config.describe(),
            fingerprint,
            master_seed: scenario.config.master_seed,
            workers,
            out_dir: out.root().display().to_string(),
            versions: Versions { chgpt_core: chgpt_core::VERSION.into(), chgpt: env!("CARGO_PKG_VERSION").into() },
            resolved_config: serde_json::to_value(&scenario.resolved)?,
            stages,
        })
    }

    /// Reads the manifest of an earlier run.
    pub fn load(out: &OutDir) -> CliResult<Self> {
        Ok(serde_json::from_value(out.read_json("manifest.json")?)?)
    }

    pub fn report_context(&self) -> ReportContext {
        ReportContext {
            name: self.scenario_name.clone(),
            description: self.description.clone(),
            model: self.model.clone(),
            fingerprint: self.fingerprint.clone(),
        }
    }

    pub fn record(&mut self, rec: StageRecord) {
        self.stages.retain(|s| s.stage != rec.stage);
        self.stages.push(rec);
    }

    pub fn write(&self, out: &OutDir) -> CliResult<()> {
        out.write_json("manifest.json", self)
    }
}
