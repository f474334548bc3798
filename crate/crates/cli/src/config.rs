//! Run configuration, loaded from a single JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tamq_core::measurement::{DatasetSpec, NoiseModel};
use tamq_core::{GridSpec, Polarization, RadialProfile};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSpec,
    /// Defaults to the bessel-windowed profile matched to the grid.
    #[serde(default)]
    pub profile: Option<RadialProfile>,
    #[serde(default = "default_frames")]
    pub n_frames: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub emit_png: bool,
    #[serde(default = "standard")]
    pub inputs: Vec<Polarization>,
    #[serde(default = "standard")]
    pub analyzers: Vec<Polarization>,
    #[serde(default = "one")]
    pub transmission: f64,
    /// Number of seeds in a `report --sweep` run.
    #[serde(default = "default_sweep")]
    pub sweep_seeds: usize,
}

fn default_frames() -> u64 {
    10_000
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn standard() -> Vec<Polarization> {
    Polarization::STANDARD.to_vec()
}
fn one() -> f64 {
    1.0
}
fn default_sweep() -> usize {
    20
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

/// Seed offset between consecutive datasets of a sweep; larger than any image offset.
pub const SWEEP_STRIDE: u64 = 256;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig =
            serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn profile(&self) -> RadialProfile {
        self.profile
            .unwrap_or_else(|| RadialProfile::default_for(&self.grid))
    }

    pub fn validate(&self) -> Result<()> {
        let field = |path: &str, e: tamq_core::Error| CliError::Config {
            path: path.into(),
            message: e.to_string(),
        };
        self.grid.validate().map_err(|e| field("grid", e))?;
        self.profile().validate().map_err(|e| field("profile", e))?;
        self.noise.validate().map_err(|e| field("noise", e))?;
        if self.sweep_seeds == 0 {
            return Err(CliError::Config {
                path: "sweep_seeds".into(),
                message: "must be at least 1".into(),
            });
        }
        self.dataset_spec(0).validate().map_err(|e| field(".", e))
    }

    /// Dataset spec for sweep member `k` (k = 0 is the configured seed).
    pub fn dataset_spec(&self, k: usize) -> DatasetSpec {
        DatasetSpec {
            inputs: self.inputs.clone(),
            analyzers: self.analyzers.clone(),
            n_frames: self.n_frames,
            grid: self.grid,
            profile: self.profile(),
            noise: self.noise,
            seed: self.seed.wrapping_add(SWEEP_STRIDE * k as u64),
            transmission: self.transmission,
        }
    }

    /// SHA-256 of the canonical JSON form, with the output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        c.emit_png = false;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
