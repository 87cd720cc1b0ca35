//! Monte-Carlo bias/variance harness for single-target localization.
//!
//! Each trial owns a noise stream seeded with `seed ^ trial`. A noise level
//! of `F` frames averages the first `F` independent frames of that stream, so
//! the levels of one trial are nested subsets of the same snapshots, the way
//! combined photographs are. Trials run in parallel.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FloorGrid, GridSpec};
use crate::par;
use crate::simulate::{render_scene, HiddenScene, DEFAULT_QUAD_ORDER};
use crate::solvers::{alternate, AlternatingConfig, ReconstructionResult};

pub const DEFAULT_FRAMES: [u32; 5] = [1, 2, 4, 8, 20];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub grid: GridSpec,
    /// Grayscale scene with exactly one wedge target.
    pub scene: HiddenScene,
    /// Per-frame noise variance.
    pub sigma2: f64,
    #[serde(default = "default_frames")]
    pub frames: Vec<u32>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub solver: AlternatingConfig,
    #[serde(default = "default_quad")]
    pub quad_order: usize,
    #[serde(default)]
    pub angle_estimator: AngleEstimator,
}

fn default_frames() -> Vec<u32> {
    DEFAULT_FRAMES.to_vec()
}

fn default_quad() -> usize {
    DEFAULT_QUAD_ORDER
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.scene.channels() != 1 || self.scene.targets.len() != 1 {
            return Err(Error::domain("benchmark scene must be grayscale with a single wedge target"));
        }
        if self.trials < 2 {
            return Err(Error::domain("at least two trials are needed for a variance"));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::domain(format!("sigma2 must be nonnegative, got {}", self.sigma2)));
        }
        if self.frames.is_empty() || self.frames.contains(&0) {
            return Err(Error::domain("frame counts must be positive"));
        }
        self.solver.validate()
    }

    /// Planted `(ρ, φ)`.
    pub fn truth(&self) -> (f64, f64) {
        let t = &self.scene.targets[0];
        (t.range, t.center)
    }
}

/// Location estimate from one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub rho: f64,
    pub phi: f64,
}

/// How `φ̂` is read off the recovered profile.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleEstimator {
    /// Peak of `ŝ` within the target, refined by a parabola through the
    /// maximum and its neighbours. Suits targets with a peaked profile.
    Peak,
    /// `ŝ`-weighted mean angle over the target's bins. Flat-topped wedge
    /// profiles make the peak jump between bins, so this is the default.
    #[default]
    Centroid,
}

/// Location of the dominant detected target: the one with the largest
/// `Σ_{n∈T} ŝ_n / ρ̂_T`, which is roughly its share of the image (radiosity
/// at different ranges is not comparable bin by bin). `ρ̂` is its range and
/// `φ̂` follows `how`. `None` when nothing was detected.
pub fn estimate_location(result: &ReconstructionResult, how: AngleEstimator) -> Option<Estimate> {
    let s = &result.channels[0].s;
    let a = &result.angles;
    let weight = |t: &crate::forward::Target| t.bins.clone().map(|i| s[i]).sum::<f64>() / t.range;
    let t = result.support.targets().iter().max_by(|x, y| weight(x).total_cmp(&weight(y)))?;
    let mass: f64 = t.bins.clone().map(|i| s[i]).sum();
    if mass <= 0.0 {
        return None;
    }
    let phi = match how {
        AngleEstimator::Centroid => t.bins.clone().map(|i| s[i] * a[i]).sum::<f64>() / mass,
        AngleEstimator::Peak => {
            let k = t.bins.clone().max_by(|&x, &y| s[x].total_cmp(&s[y])).expect("nonempty target");
            let mut phi = a[k];
            if k > 0 && k + 1 < s.len() {
                let (l, c, r) = (s[k - 1], s[k], s[k + 1]);
                let curv = l - 2.0 * c + r;
                if curv < 0.0 {
                    phi += 0.5 * (l - r) / curv * (a[1] - a[0]);
                }
            }
            phi
        }
    };
    Some(Estimate { rho: t.range, phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub bias: f64,
    pub std: f64,
    /// Standard error of the bias, `std/√trials`.
    pub bias_se: f64,
    pub normalized_bias: f64,
    pub normalized_std: f64,
}

impl Summary {
    fn of(values: &[f64], truth: f64) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        Self {
            mean,
            bias: mean - truth,
            std,
            bias_se: std / n.sqrt(),
            normalized_bias: (mean - truth) / truth,
            normalized_std: std / truth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLevel {
    pub frames: u32,
    pub rho: Summary,
    pub phi: Summary,
    /// Trials whose reconstruction fell back to a full-span support.
    pub fallbacks: usize,
    /// Trials with no usable target; they are left out of the statistics.
    pub misses: usize,
    pub non_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub truth: Estimate,
    pub trials: usize,
    pub levels: Vec<FrameLevel>,
    /// `estimates[level]`, one entry per trial that located a target.
    pub estimates: Vec<Vec<Estimate>>,
}

impl BenchmarkReport {
    pub const HEADER: [&'static str; 16] = [
        "frames",
        "trials",
        "rho_true",
        "rho_mean",
        "rho_bias",
        "rho_std",
        "rho_bias_se",
        "phi_true",
        "phi_mean",
        "phi_bias",
        "phi_std",
        "phi_bias_se",
        "rho_std_normalized",
        "phi_std_normalized",
        "fallbacks",
        "misses",
    ];

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.levels
            .iter()
            .map(|l| {
                vec![
                    l.frames as f64,
                    self.trials as f64,
                    self.truth.rho,
                    l.rho.mean,
                    l.rho.bias,
                    l.rho.std,
                    l.rho.bias_se,
                    self.truth.phi,
                    l.phi.mean,
                    l.phi.bias,
                    l.phi.std,
                    l.phi.bias_se,
                    l.rho.normalized_std,
                    l.phi.normalized_std,
                    l.fallbacks as f64,
                    l.misses as f64,
                ]
            })
            .collect()
    }
}

/// Measurements for one trial at every frame level.
pub fn trial_measurements(clean: &DVector<f64>, sigma2: f64, frames: &[u32], seed: u64) -> Result<Vec<DVector<f64>>> {
    if sigma2 == 0.0 {
        return Ok(vec![clean.clone(); frames.len()]);
    }
    let normal = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::domain(e.to_string()))?;
    let max = frames.iter().copied().max().unwrap_or(0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // draw the frames once and average prefixes
    let stream: Vec<DVector<f64>> = (0..max).map(|_| clean.map(|_| normal.sample(&mut rng))).collect();
    Ok(frames
        .iter()
        .map(|&f| {
            let f = f as usize;
            let sum = stream[..f].iter().fold(DVector::zeros(clean.len()), |a, b| a + b);
            clean + sum / f as f64
        })
        .collect())
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let grid = FloorGrid::from_spec(cfg.grid)?;
    let clean = render_scene(&grid, &cfg.scene, cfg.quad_order)?.remove(0);
    let (rho, phi) = cfg.truth();

    let per_trial = par::try_map_range(cfg.trials, |trial| {
        let ys = trial_measurements(&clean, cfg.sigma2, &cfg.frames, cfg.seed ^ trial as u64)?;
        ys.iter()
            .map(|y| {
                let r = alternate(&grid, y, &cfg.solver)?;
                let est = if r.fallback_support { None } else { estimate_location(&r, cfg.angle_estimator) };
                Ok((est, r.fallback_support, r.converged))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut levels = Vec::with_capacity(cfg.frames.len());
    let mut estimates = Vec::with_capacity(cfg.frames.len());
    for (l, &frames) in cfg.frames.iter().enumerate() {
        let est: Vec<Estimate> = per_trial.iter().filter_map(|t| t[l].0).collect();
        if est.len() < 2 {
            return Err(Error::Numerical(format!("only {} of {} trials located a target at {frames} frames", est.len(), cfg.trials)));
        }
        let rhos: Vec<f64> = est.iter().map(|e| e.rho).collect();
        let phis: Vec<f64> = est.iter().map(|e| e.phi).collect();
        levels.push(FrameLevel {
            frames,
            rho: Summary::of(&rhos, rho),
            phi: Summary::of(&phis, phi),
            fallbacks: per_trial.iter().filter(|t| t[l].1).count(),
            misses: per_trial.iter().filter(|t| t[l].0.is_none()).count(),
            non_converged: per_trial.iter().filter(|t| !t[l].2).count(),
        });
        estimates.push(est);
    }
    Ok(BenchmarkReport { truth: Estimate { rho, phi }, trials: cfg.trials, levels, estimates })
}
