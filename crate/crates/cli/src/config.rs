//! Experiment configuration: JSON on disk, flag overrides on top.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use mastergeo::ModelSpec;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PrimaryMaster,
    DualMaster,
    PrimaryMoments,
    DualMoments,
    ContactPsi,
    ContactPhi,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::PrimaryMaster => "primary-master",
            Mode::DualMaster => "dual-master",
            Mode::PrimaryMoments => "primary-moments",
            Mode::DualMoments => "dual-moments",
            Mode::ContactPsi => "contact-psi",
            Mode::ContactPhi => "contact-phi",
        }
    }

    /// Primary-side modes are parameterized by theta, dual-side by eta.
    pub fn uses_theta(&self) -> bool {
        matches!(
            self,
            Mode::PrimaryMaster | Mode::PrimaryMoments | Mode::ContactPsi
        )
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Initial condition, mode-dependent. Distributions may be omitted, in which
/// case one is sampled uniformly on the simplex from the seed.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitialCondition {
    Distribution { distribution: Vec<f64> },
    Moments { moments: Vec<f64>, psi: f64 },
    ThetaAvg { theta_avg: Vec<f64>, h: f64 },
    Contact { y: Vec<f64>, z: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub mode: Mode,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub eta: Option<Vec<f64>>,
    #[serde(default)]
    pub initial: Option<InitialCondition>,
    pub t_max: f64,
    pub dt: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Flag-level overrides of config fields.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, overrides: Overrides) {
        if overrides.output.is_some() {
            self.output = overrides.output;
        }
        if let Some(t_max) = overrides.t_max {
            self.t_max = t_max;
        }
        if let Some(dt) = overrides.dt {
            self.dt = dt;
        }
        if overrides.seed.is_some() {
            self.seed = overrides.seed;
        }
    }
}
