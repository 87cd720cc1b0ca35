//! TOML run configurations, one schema per subcommand. Unknown keys are
//! rejected so typos surface as config errors instead of silent defaults.

use std::path::{Path, PathBuf};

use penumbra::geometry::GridSpec;
use penumbra::simulate::DEFAULT_QUAD_ORDER;
use penumbra::solvers::{AlternatingConfig, SolveOptions};
use penumbra::HiddenScene;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Linear,
    Alt,
    AltRgb,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Linear => "linear",
            Algorithm::Alt => "alt",
            Algorithm::AltRgb => "alt-rgb",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma2: f64,
    #[serde(default = "one")]
    pub frames: u32,
}

fn one() -> u32 {
    1
}

fn quad() -> usize {
    DEFAULT_QUAD_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub grid: GridSpec,
    pub scene: HiddenScene,
    /// Omitted for a noiseless render.
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "quad")]
    pub quad_order: usize,
}

/// Polar-pixel dictionary and weights for the linear inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub n_angles: usize,
    /// Strictly increasing dictionary ranges.
    pub ranges: Vec<f64>,
    /// ℓ1 weight as a fraction of the weight that zeroes the solution.
    #[serde(default = "default_linear_lambda")]
    pub lambda: f64,
    /// Group weight per range block, same scaling; zero disables grouping.
    #[serde(default)]
    pub group: f64,
    #[serde(default = "default_linear_opts")]
    pub solver: SolveOptions,
}

fn default_linear_lambda() -> f64 {
    1e-2
}

fn default_linear_opts() -> SolveOptions {
    SolveOptions { max_iter: 20_000, tol: 1e-7 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Measurement CSV; relative paths resolve against the config file.
    pub measurement: PathBuf,
    pub grid: GridSpec,
    #[serde(default)]
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub alternating: Option<AlternatingConfig>,
    #[serde(default)]
    pub linear: Option<LinearConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrbConfig {
    pub grid: GridSpec,
    pub sigma2: f64,
    #[serde(default = "unit")]
    pub c_s: f64,
    pub rhos: Vec<f64>,
    /// Explicit angles; takes precedence over `phi_steps`.
    #[serde(default)]
    pub phis: Option<Vec<f64>>,
    /// Sweep `k·π/(2·steps)` for `k = 1..steps−1`.
    #[serde(default)]
    pub phi_steps: Option<usize>,
    #[serde(default = "quad")]
    pub quad_order: usize,
}

fn unit() -> f64 {
    1.0
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))
}
