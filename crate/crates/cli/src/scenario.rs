//! Scenario files: TOML with the layout documented in `SCHEMA.md`.

use std::path::Path;

use chgpt_core::arbitrage::Na1Verdict;
use chgpt_core::filtration::DetectorConfig;
use chgpt_core::hedging::{Claim, HedgeConfig};
use chgpt_core::model::{
    CoefFn, FiltrationTag, Intensity, ModelSpec, RandomTimeSpec, RegimeCoefficients, ScenarioConfig, TimeGrid,
    TimeLaw,
};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

/// Version of the scenario format and of every output file.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbitrageSettings {
    /// Number of equally spaced checkpoints, including 0 and T.
    pub checkpoints: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeSettings {
    pub degree: usize,
    pub use_jump: bool,
    pub tau_buckets: usize,
    pub train_paths: Option<usize>,
    pub test_paths: usize,
    pub ladder: Vec<usize>,
    pub ablation: bool,
}

/// Verdicts the scenario declares in advance; a mismatch fails the run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expected {
    pub detection: Option<String>,
    pub na1: Option<Na1Verdict>,
    /// `accepted` or `refused`.
    pub deflator: Option<String>,
    /// `pass` or `fail`.
    pub martingale: Option<String>,
    pub hedge_rmse_max: Option<f64>,
}

impl Expected {
    pub fn is_empty(&self) -> bool {
        *self == Expected::default()
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub config: ScenarioConfig,
    pub detect: DetectorConfig,
    pub arbitrage: ArbitrageSettings,
    pub claim: Option<Claim>,
    pub hedge: HedgeSettings,
    pub expected: Expected,
    /// The parsed file with overrides applied, echoed into the manifest.
    pub resolved: Table,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub window: Option<usize>,
    pub run_length: Option<usize>,
}

pub fn load(path: &Path, overrides: Overrides) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse(&text, overrides)
}

pub fn parse(text: &str, overrides: Overrides) -> CliResult<Scenario> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Schema(e.to_string()))?;
    if let Some(p) = overrides.paths {
        table.insert("paths".into(), Value::Integer(p as i64));
    }
    if let Some(s) = overrides.steps {
        table.insert("steps".into(), Value::Integer(s as i64));
    }
    if let Some(s) = overrides.seed {
        // TOML integers are signed; keep the bit pattern
        table.insert("seed".into(), Value::Integer(s as i64));
    }
    for (key, v) in [("window", overrides.window), ("run_length", overrides.run_length)] {
        if let Some(v) = v {
            let det = table.entry("detect").or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(t) = det {
                t.insert(key.into(), Value::Integer(v as i64));
            }
        }
    }
    let root = Section::root(&table);
    root.allow(&[
        "schema_version", "name", "description", "horizon", "steps", "paths", "seed", "s0", "rho", "filtration",
        "coefficients", "tau", "detect", "arbitrage", "claim", "hedge", "expected",
    ])?;
    let version = root.integer("schema_version")?;
    if version != SCHEMA_VERSION as i64 {
        return Err(root.err("schema_version", format!("unsupported version {version}, expected {SCHEMA_VERSION}")));
    }
    let name = root.string("name")?;
    let description = root.opt_string("description")?.unwrap_or_default();
    let horizon = root.float("horizon")?;
    let steps = root.count("steps")?;
    let grid = TimeGrid::new(horizon, steps).map_err(|e| root.err("steps", e.to_string()))?;
    let n_paths = root.count("paths")?;
    let seed = root.integer("seed")? as u64;
    let s0 = root.opt_float("s0")?.unwrap_or(1.0);
    let rho = root.opt_float("rho")?.unwrap_or(0.0);
    let filtration_name = root.opt_string("filtration")?.unwrap_or_else(|| "GX".into());
    let filtration: FiltrationTag =
        filtration_name.parse().map_err(|_| root.err("filtration", format!("unknown filtration `{filtration_name}`")))?;

    let coefficients = parse_coefficients(&root.section("coefficients")?)?;
    let tau_sec = root.section("tau")?;
    let (tau, window) = parse_tau(&tau_sec)?;
    let mut model = ModelSpec::new(grid, coefficients, tau).with_rho(rho).with_s0(s0);
    model.window = window;
    if let Some(m) = tau_sec.opt_count("max_attempts")? {
        model.max_attempts = m;
    }
    let config = ScenarioConfig { model, n_paths, master_seed: seed, filtration };
    config.validate_parameters()?;
    let report = config.model.coefficients.validate(&config.model.lattice());
    if let Some(v) = report.violations.first() {
        return Err(CliError::Schema(format!(
            "coefficients.{}: {:?} violated at (t, x) = ({}, {}): {} ({} violations in total)",
            v.function,
            v.kind,
            v.t,
            v.x,
            v.detail,
            report.violations.len()
        )));
    }

    let detect = match root.opt_section("detect")? {
        Some(d) => {
            d.allow(&["window", "run_length"])?;
            let def = DetectorConfig::default();
            DetectorConfig {
                window: d.opt_count("window")?.unwrap_or(def.window),
                run_length: d.opt_count("run_length")?.unwrap_or(def.run_length),
            }
        }
        None => DetectorConfig::default(),
    };
    let arbitrage = match root.opt_section("arbitrage")? {
        Some(a) => {
            a.allow(&["checkpoints", "confidence"])?;
            let checkpoints = a.opt_count("checkpoints")?.unwrap_or(5);
            if checkpoints < 2 {
                return Err(a.err("checkpoints", "need at least 2 (0 and T)"));
            }
            let confidence = a.opt_float("confidence")?.unwrap_or(0.99);
            if !(confidence > 0.0 && confidence < 1.0) {
                return Err(a.err("confidence", format!("must lie in (0, 1), got {confidence}")));
            }
            ArbitrageSettings { checkpoints, confidence }
        }
        None => ArbitrageSettings { checkpoints: 5, confidence: 0.99 },
    };
    let claim = root.opt_section("claim")?.map(|c| parse_claim(&c)).transpose()?;
    let hedge = match root.opt_section("hedge")? {
        Some(h) => {
            h.allow(&["degree", "use_jump", "tau_buckets", "train_paths", "test_paths", "ladder", "ablation"])?;
            HedgeSettings {
                degree: h.opt_count("degree")?.unwrap_or(3),
                use_jump: h.opt_bool("use_jump")?.unwrap_or(false),
                tau_buckets: h.opt_count("tau_buckets")?.unwrap_or(10),
                train_paths: h.opt_count("train_paths")?,
                test_paths: h.opt_count("test_paths")?.unwrap_or(2000),
                ladder: h.opt_counts("ladder")?.unwrap_or_default(),
                ablation: h.opt_bool("ablation")?.unwrap_or(false),
            }
        }
        None => HedgeSettings {
            degree: 3,
            use_jump: false,
            tau_buckets: 10,
            train_paths: None,
            test_paths: 2000,
            ladder: Vec::new(),
            ablation: false,
        },
    };
    let expected = match root.opt_section("expected")? {
        Some(e) => parse_expected(&e)?,
        None => Expected::default(),
    };
    Ok(Scenario { name, description, config, detect, arbitrage, claim, hedge, expected, resolved: table })
}

impl Scenario {
    pub fn report_context(&self) -> crate::report::ReportContext {
        crate::report::ReportContext {
            name: self.name.clone(),
            description: self.description.clone(),
            model: self.config.describe(),
            fingerprint: self.config.fingerprint(),
        }
    }

    pub fn hedge_config(&self) -> HedgeConfig {
        HedgeConfig {
            tag: self.config.filtration,
            degree: self.hedge.degree,
            use_jump: self.hedge.use_jump,
            tau_buckets: self.hedge.tau_buckets,
        }
    }

    /// Equally spaced checkpoint nodes, including 0 and n.
    pub fn checkpoints(&self) -> Vec<usize> {
        let n = self.config.model.grid.n_steps();
        let m = self.arbitrage.checkpoints - 1;
        let mut out: Vec<usize> = (0..=m).map(|i| i * n / m).collect();
        out.dedup();
        out
    }
}

fn parse_coefficients(sec: &Section) -> CliResult<RegimeCoefficients> {
    sec.allow(&["lipschitz", "mu1", "mu2", "sigma1", "sigma2"])?;
    let lipschitz = sec.float("lipschitz")?;
    let f = |key: &str| parse_coef(&sec.section(key)?);
    RegimeCoefficients::new(f("mu1")?, f("mu2")?, f("sigma1")?, f("sigma2")?, lipschitz)
        .map_err(|e| sec.err("lipschitz", e.to_string()))
}

fn parse_coef(sec: &Section) -> CliResult<CoefFn> {
    let family = sec.string("family")?;
    match family.as_str() {
        "constant" => {
            sec.allow(&["family", "value"])?;
            Ok(CoefFn::Constant(sec.float("value")?))
        }
        "affine" => {
            sec.allow(&["family", "a", "b", "c"])?;
            Ok(CoefFn::Affine {
                a: sec.opt_float("a")?.unwrap_or(0.0),
                b: sec.opt_float("b")?.unwrap_or(0.0),
                c: sec.opt_float("c")?.unwrap_or(0.0),
            })
        }
        "bounded_sigmoid" => {
            sec.allow(&["family", "lo", "hi", "slope", "center"])?;
            Ok(CoefFn::BoundedSigmoid {
                lo: sec.float("lo")?,
                hi: sec.float("hi")?,
                slope: sec.float("slope")?,
                center: sec.opt_float("center")?.unwrap_or(0.0),
            })
        }
        other => Err(sec.err(
            "family",
            format!("unknown registry name `{other}` (expected constant, affine or bounded_sigmoid)"),
        )),
    }
}

fn parse_tau(sec: &Section) -> CliResult<(RandomTimeSpec, Option<(f64, f64)>)> {
    let kind = sec.string("kind")?;
    let common = ["kind", "window", "max_attempts"];
    let allow = |extra: &[&str]| sec.allow(&[&common[..], extra].concat());
    let spec = match kind.as_str() {
        "deterministic" => {
            allow(&["t0"])?;
            RandomTimeSpec::Deterministic { t0: sec.float("t0")? }
        }
        "independent" => {
            allow(&["law"])?;
            let law = sec.section("law")?;
            let family = law.string("family")?;
            RandomTimeSpec::IndependentLaw(match family.as_str() {
                "uniform" => {
                    law.allow(&["family", "lo", "hi"])?;
                    TimeLaw::Uniform { lo: law.opt_float("lo")?.unwrap_or(0.0), hi: law.float("hi")? }
                }
                "exponential" => {
                    law.allow(&["family", "rate"])?;
                    TimeLaw::Exponential { rate: law.float("rate")? }
                }
                other => {
                    return Err(law.err("family", format!("unknown law `{other}` (expected uniform or exponential)")))
                }
            })
        }
        "cox" => {
            allow(&["intensity"])?;
            let i = sec.section("intensity")?;
            let family = i.string("family")?;
            RandomTimeSpec::Cox(match family.as_str() {
                "constant" => {
                    i.allow(&["family", "value"])?;
                    Intensity::Constant(i.float("value")?)
                }
                "affine" => {
                    i.allow(&["family", "base", "t_slope", "w1_slope", "x_slope"])?;
                    Intensity::Affine {
                        base: i.opt_float("base")?.unwrap_or(0.0),
                        t_slope: i.opt_float("t_slope")?.unwrap_or(0.0),
                        w1_slope: i.opt_float("w1_slope")?.unwrap_or(0.0),
                        x_slope: i.opt_float("x_slope")?.unwrap_or(0.0),
                    }
                }
                other => {
                    return Err(i.err("family", format!("unknown intensity `{other}` (expected constant or affine)")))
                }
            })
        }
        "hitting" => {
            allow(&["level"])?;
            RandomTimeSpec::HittingTime { level: sec.float("level")? }
        }
        other => {
            return Err(sec.err(
                "kind",
                format!("unknown kind `{other}` (expected deterministic, independent, cox or hitting)"),
            ))
        }
    };
    let window = match sec.opt_floats("window")? {
        None => None,
        Some(w) if w.len() == 2 => Some((w[0], w[1])),
        Some(_) => return Err(sec.err("window", "expected [lo, hi]")),
    };
    Ok((spec, window))
}

fn parse_claim(sec: &Section) -> CliResult<Claim> {
    let kind = sec.string("kind")?;
    Ok(match kind.as_str() {
        "constant" => {
            sec.allow(&["kind", "value"])?;
            Claim::Constant { value: sec.float("value")? }
        }
        "asset" => {
            sec.allow(&["kind"])?;
            Claim::Asset
        }
        "digital" => {
            sec.allow(&["kind", "strike"])?;
            Claim::Digital { strike: sec.float("strike")? }
        }
        "digital_state" => {
            sec.allow(&["kind", "level"])?;
            Claim::DigitalState { level: sec.opt_float("level")?.unwrap_or(0.0) }
        }
        "call" => {
            sec.allow(&["kind", "strike"])?;
            Claim::Call { strike: sec.float("strike")? }
        }
        "switch_by" => {
            sec.allow(&["kind", "time"])?;
            Claim::SwitchBy { time: sec.float("time")? }
        }
        other => return Err(sec.err("kind", format!("unknown claim `{other}`"))),
    })
}

fn parse_expected(sec: &Section) -> CliResult<Expected> {
    sec.allow(&["detection", "na1", "deflator", "martingale", "hedge_rmse_max"])?;
    let one_of = |key: &str, options: &[&str]| -> CliResult<Option<String>> {
        match sec.opt_string(key)? {
            Some(v) if options.contains(&v.as_str()) => Ok(Some(v)),
            Some(v) => Err(sec.err(key, format!("unknown verdict `{v}` (expected one of {})", options.join(", ")))),
            None => Ok(None),
        }
    };
    let na1 = one_of("na1", &["stable", "diverging", "inconclusive"])?.map(|v| match v.as_str() {
        "stable" => Na1Verdict::Stable,
        "diverging" => Na1Verdict::Diverging,
        _ => Na1Verdict::Inconclusive,
    });
    Ok(Expected {
        detection: one_of("detection", &["detected", "no_switch", "undetectable"])?,
        na1,
        deflator: one_of("deflator", &["accepted", "refused"])?,
        martingale: one_of("martingale", &["pass", "fail"])?,
        hedge_rmse_max: sec.opt_float("hedge_rmse_max")?,
    })
}

/// A TOML table together with its dotted path, for error messages.
struct Section<'a> {
    table: &'a Table,
    path: String,
}

impl<'a> Section<'a> {
    fn root(table: &'a Table) -> Self {
        Section { table, path: String::new() }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Schema(format!("{}: {msg}", self.key_path(key)))
    }

    fn allow(&self, keys: &[&str]) -> CliResult<()> {
        match self.table.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(self.err(k, "unknown field")),
            None => Ok(()),
        }
    }

    fn get(&self, key: &str) -> CliResult<&'a Value> {
        self.table.get(key).ok_or_else(|| self.err(key, "missing field"))
    }

    fn section(&self, key: &str) -> CliResult<Section<'a>> {
        match self.get(key)? {
            Value::Table(t) => Ok(Section { table: t, path: self.key_path(key) }),
            _ => Err(self.err(key, "expected a table")),
        }
    }

    fn opt_section(&self, key: &str) -> CliResult<Option<Section<'a>>> {
        if self.table.contains_key(key) { self.section(key).map(Some) } else { Ok(None) }
    }

    fn float(&self, key: &str) -> CliResult<f64> {
        match self.get(key)? {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.err(key, "expected a number")),
        }
    }

    fn opt_float(&self, key: &str) -> CliResult<Option<f64>> {
        if self.table.contains_key(key) { self.float(key).map(Some) } else { Ok(None) }
    }

    fn opt_floats(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.err(key, "expected an array of numbers")),
                })
                .collect::<CliResult<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.err(key, "expected an array of numbers")),
        }
    }

    fn integer(&self, key: &str) -> CliResult<i64> {
        match self.get(key)? {
            Value::Integer(i) => Ok(*i),
            _ => Err(self.err(key, "expected an integer")),
        }
    }

    fn count(&self, key: &str) -> CliResult<usize> {
        let i = self.integer(key)?;
        if i < 1 {
            return Err(self.err(key, format!("must be at least 1, got {i}")));
        }
        Ok(i as usize)
    }

    fn opt_count(&self, key: &str) -> CliResult<Option<usize>> {
        if self.table.contains_key(key) { self.count(key).map(Some) } else { Ok(None) }
    }

    fn opt_counts(&self, key: &str) -> CliResult<Option<Vec<usize>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 1 => Ok(*i as usize),
                    _ => Err(self.err(key, "expected an array of positive integers")),
                })
                .collect::<CliResult<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.err(key, "expected an array of positive integers")),
        }
    }

    fn opt_bool(&self, key: &str) -> CliResult<Option<bool>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(self.err(key, "expected true or false")),
        }
    }

    fn string(&self, key: &str) -> CliResult<String> {
        match self.get(key)? {
            Value::String(s) => Ok(s.clone()),
            _ => Err(self.err(key, "expected a string")),
        }
    }

    fn opt_string(&self, key: &str) -> CliResult<Option<String>> {
        if self.table.contains_key(key) { self.string(key).map(Some) } else { Ok(None) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
name = "unit"
horizon = 1.0
steps = 64
paths = 10
seed = 3
rho = 0.5

[coefficients]
lipschitz = 1.0
mu1 = { family = "constant", value = 0.05 }
mu2 = { family = "constant", value = 0.05 }
sigma1 = { family = "constant", value = 0.2 }
sigma2 = { family = "bounded_sigmoid", lo = 0.2, hi = 0.4, slope = 1.0 }

[tau]
kind = "cox"
intensity = { family = "constant", value = 2.0 }
window = [0.2, 0.8]
"#;

    #[test]
    fn base_parses() {
        let s = parse(BASE, Overrides::default()).unwrap();
        assert_eq!(s.config.model.grid.n_steps(), 64);
        assert_eq!(s.config.model.window, Some((0.2, 0.8)));
        assert_eq!(s.checkpoints(), vec![0, 16, 32, 48, 64]);
        assert!(s.expected.is_empty());
    }

    #[test]
    fn overrides_apply() {
        let o = Overrides { paths: Some(7), steps: Some(128), seed: Some(u64::MAX), ..Overrides::default() };
        let s = parse(BASE, o).unwrap();
        assert_eq!(s.config.n_paths, 7);
        assert_eq!(s.config.model.grid.n_steps(), 128);
        assert_eq!(s.config.master_seed, u64::MAX);
    }

    #[test]
    fn rho_error_names_field() {
        let err = parse(&BASE.replace("rho = 0.5", "rho = 1.5"), Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().starts_with("rho:"), "{err}");
    }

    #[test]
    fn unknown_family_names_path() {
        let text = BASE.replace("sigma1 = { family = \"constant\"", "sigma1 = { family = \"quadratic\"");
        let err = parse(&text, Overrides::default()).unwrap_err();
        assert!(err.to_string().starts_with("coefficients.sigma1.family:"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse(&format!("{BASE}\n[hedge]\ndegre = 3\n"), Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("hedge.degre"), "{err}");
    }

    #[test]
    fn failed_coefficient_probe_is_schema_error() {
        let text = BASE.replace("sigma1 = { family = \"constant\", value = 0.2 }", "sigma1 = { family = \"affine\", c = 1.0 }");
        let err = parse(&text, Overrides::default()).unwrap_err();
        assert!(err.to_string().starts_with("coefficients.sigma1"), "{err}");
    }
}
