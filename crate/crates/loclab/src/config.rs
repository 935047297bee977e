//! Run configuration: a single TOML file carrying the experiment kind,
//! the ensemble reference, geometry, scales, and the mandatory seed and
//! trial count.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub params: ParamsSection,
    /// Optional inline palette of extra distributions.
    #[serde(default)]
    pub palette: Vec<PaletteEntry>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct RunSection {
    pub experiment: String,
    pub seed: u64,
    pub trials: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct EnsembleSection {
    /// Registry name; defaults to the two-point law when absent.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct GeometrySection {
    /// Box side for square-domain experiments.
    #[serde(default)]
    pub side: Option<i64>,
    /// Box sides for multi-scale sweeps.
    #[serde(default)]
    pub sides: Option<Vec<i64>>,
    /// Tilted rectangle dimensions.
    #[serde(default)]
    pub a: Option<i64>,
    #[serde(default)]
    pub b: Option<i64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct ParamsSection {
    #[serde(default)]
    pub ebar: Option<f64>,
    #[serde(default)]
    pub ebar_max: Option<f64>,
    /// Resonance exponent: the threshold is `e^{-l1}`.
    #[serde(default)]
    pub l1: Option<f64>,
    /// Alternative: per-side exponent `l1 = side^l1_power`.
    #[serde(default)]
    pub l1_power: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub boundary_samples: Option<u64>,
    #[serde(default)]
    pub ground_set: Option<usize>,
    #[serde(default)]
    pub beta_floor: Option<f64>,
    #[serde(default)]
    pub families: Option<u64>,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub l0: Option<i64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub net_radius: Option<f64>,
    #[serde(default)]
    pub instances: Option<u64>,
    #[serde(default)]
    pub relaxed: Option<bool>,
    /// Lemma name for the checker suites.
    #[serde(default)]
    pub lemma: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct PaletteEntry {
    pub name: String,
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
    #[serde(default)]
    pub pieces: Vec<(f64, f64, f64)>,
    pub bound: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(RunConfig, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Invalid(format!("config is not UTF-8: {e}")))?;
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Invalid(format!("config parse: {e}")))?;
        config.validate()?;
        Ok((config, bytes))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.run.trials == 0 {
            return Err(CliError::Invalid("trials must be positive".into()));
        }
        Ok(())
    }

    /// Output directory: the `LOCLAB_OUT` environment variable overrides
    /// the config, which defaults to `loclab-out`.
    pub fn output_dir(&self) -> PathBuf {
        if let Ok(dir) = std::env::var("LOCLAB_OUT") {
            return PathBuf::from(dir);
        }
        self.run.output_dir.clone().unwrap_or_else(|| PathBuf::from("loclab-out"))
    }

    pub fn require_side(&self) -> Result<i64, CliError> {
        self.geometry.side.ok_or_else(|| CliError::Invalid("geometry.side is required".into()))
    }

    pub fn require_rect(&self) -> Result<(i64, i64), CliError> {
        match (self.geometry.a, self.geometry.b) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(CliError::Invalid("geometry.a and geometry.b are required".into())),
        }
    }
}
