use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::coefficients::{ProbeLattice, RegimeCoefficients, ValidationReport};
use crate::model::grid::TimeGrid;
use crate::model::random_time::RandomTimeSpec;

/// Information structure an agent trades on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FiltrationTag {
    /// Generated by the price path alone.
    #[serde(rename = "FX")]
    Fx,
    /// Price path together with the regime indicator.
    #[serde(rename = "GX")]
    Gx,
    /// Both Brownian motions together with the regime indicator.
    #[serde(rename = "G")]
    G,
    /// `G` initially enlarged by the change point.
    #[serde(rename = "G_tau")]
    GTau,
    /// `GX` initially enlarged by the change point.
    #[serde(rename = "GX_tau")]
    GxTau,
}

impl FiltrationTag {
    pub const ALL: [FiltrationTag; 5] =
        [FiltrationTag::Fx, FiltrationTag::Gx, FiltrationTag::G, FiltrationTag::GTau, FiltrationTag::GxTau];

    pub fn as_str(self) -> &'static str {
        match self {
            FiltrationTag::Fx => "FX",
            FiltrationTag::Gx => "GX",
            FiltrationTag::G => "G",
            FiltrationTag::GTau => "G_tau",
            FiltrationTag::GxTau => "GX_tau",
        }
    }

    /// Whether tau itself is known from time zero.
    pub fn knows_tau(self) -> bool {
        matches!(self, FiltrationTag::GTau | FiltrationTag::GxTau)
    }
}

impl fmt::Display for FiltrationTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FiltrationTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FiltrationTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid("filtration", format!("unknown filtration `{s}`")))
    }
}

/// Everything needed to simulate paths of the regime-switching model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub grid: TimeGrid,
    pub s0: f64,
    pub rho: f64,
    pub coefficients: RegimeCoefficients,
    pub tau: RandomTimeSpec,
    /// Optional conditioning `tau in [lo, hi]`, enforced by redrawing the
    /// whole path.
    pub window: Option<(f64, f64)>,
    pub max_attempts: usize,
}

impl ModelSpec {
    pub fn new(grid: TimeGrid, coefficients: RegimeCoefficients, tau: RandomTimeSpec) -> Self {
        ModelSpec { grid, s0: 1.0, rho: 0.0, coefficients, tau, window: None, max_attempts: 10_000 }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_s0(mut self, s0: f64) -> Self {
        self.s0 = s0;
        self
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.window = Some((lo, hi));
        self
    }

    pub fn lattice(&self) -> ProbeLattice {
        ProbeLattice::standard(self.grid.horizon())
    }

    /// Parameter checks that do not involve the coefficient functions.
    pub fn validate_parameters(&self) -> Result<()> {
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::invalid("rho", format!("must lie in [-1, 1], got {}", self.rho)));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::invalid("s0", format!("must be positive, got {}", self.s0)));
        }
        if let Some((lo, hi)) = self.window {
            if !(lo >= 0.0 && hi > lo && hi <= self.grid.horizon()) {
                return Err(Error::invalid("tau.window", format!("need 0 <= lo < hi <= T, got [{lo}, {hi}]")));
            }
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts", "must be positive"));
        }
        self.tau.validate(self.grid.horizon())
    }

    /// Full validation: parameters, then the coefficient probe. A failed
    /// coefficient probe is returned as the report, not as an error.
    pub fn validate(&self) -> Result<ValidationReport> {
        self.validate_parameters()?;
        Ok(self.coefficients.validate(&self.lattice()))
    }

    pub fn describe(&self) -> String {
        format!(
            "T={:?};n={};s0={:?};rho={:?};{};tau={};window={:?}",
            self.grid.horizon(),
            self.grid.n_steps(),
            self.s0,
            self.rho,
            self.coefficients.describe(),
            self.tau.describe(),
            self.window
        )
    }

    /// SHA-256 of the canonical description, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.describe().as_bytes()))
    }
}

/// A model together with the run parameters.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub model: ModelSpec,
    pub n_paths: usize,
    pub master_seed: u64,
    pub filtration: FiltrationTag,
}

impl ScenarioConfig {
    pub fn validate_parameters(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("paths", "must be at least 1"));
        }
        self.model.validate_parameters()
    }

    pub fn describe(&self) -> String {
        format!("{};paths={};seed={};filtration={}", self.model.describe(), self.n_paths, self.master_seed, self.filtration)
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.describe().as_bytes()))
    }
}
