//! Alternating nonlinear inversion.
//!
//! 1. Fit an angular profile assuming every wedge is at the far-field range.
//! 2. Segment that profile into targets with a moving-average threshold.
//! 3. Update per-target ranges (and per-target scale factors `z`).
//! 4. Update the profile at the new ranges.
//!
//! Steps 3 and 4 repeat until the relative objective change drops below the
//! tolerance. The RGB variant shares ranges and support across channels and
//! keeps a profile per channel.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ambient::AmbientProjector;
use super::fista::{mfista, Quadratic, SolveOptions};
use super::prox::{Regularizer, WaveletL1};
use crate::error::{Error, Result};
use crate::forward::{build_ambient_basis, AngularGrid, NearFieldSource, Target, TargetSupport, DEFAULT_FAR_FIELD_RANGE};
use crate::geometry::{build_visibility_matrix, dist2_unchecked, FloorGrid};
use crate::par;

/// Target-counting threshold `κ_n = α/(2ℓ+1)·Σ_{|i−n|≤ℓ} s_i` (zero outside
/// the grid). A bin must also exceed `rel_floor · max(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdSpec {
    pub alpha: f64,
    pub half_window: usize,
    pub min_width: usize,
    pub rel_floor: f64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        Self { alpha: 0.8, half_window: 6, min_width: 1, rel_floor: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternatingConfig {
    pub n_angles: usize,
    #[serde(default)]
    pub near_field: Option<NearFieldSource>,
    #[serde(default = "default_far_field")]
    pub far_field_range: f64,
    /// Lower bound `c` on every target range.
    #[serde(default = "default_min_range")]
    pub min_range: f64,
    /// Initialization weight as a fraction of `‖W K⊥ᵀ y⊥‖_∞`.
    #[serde(default = "default_lambda_init")]
    pub lambda_init: f64,
    /// Wavelet weight, same scaling as `lambda_init`.
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    /// Background smoothness weight as a fraction of `‖K⊥‖²`.
    #[serde(default = "default_lambda2")]
    pub lambda2: f64,
    #[serde(default)]
    pub threshold: ThresholdSpec,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_inner")]
    pub inner: SolveOptions,
    /// Log-spaced ranges tried for each target before the first gradient
    /// refinement.
    #[serde(default = "default_range_grid")]
    pub range_grid: usize,
    #[serde(default = "default_range_iters")]
    pub range_iters: usize,
}

fn default_far_field() -> f64 {
    DEFAULT_FAR_FIELD_RANGE
}
fn default_min_range() -> f64 {
    0.02
}
fn default_lambda_init() -> f64 {
    1e-3
}
fn default_lambda1() -> f64 {
    1e-3
}
fn default_lambda2() -> f64 {
    1e-2
}
fn default_max_outer() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-6
}
fn default_inner() -> SolveOptions {
    SolveOptions { max_iter: 1500, tol: 1e-6 }
}
fn default_range_grid() -> usize {
    48
}
fn default_range_iters() -> usize {
    60
}

impl AlternatingConfig {
    pub fn new(n_angles: usize) -> Self {
        Self {
            n_angles,
            near_field: None,
            far_field_range: default_far_field(),
            min_range: default_min_range(),
            lambda_init: default_lambda_init(),
            lambda1: default_lambda1(),
            lambda2: default_lambda2(),
            threshold: ThresholdSpec::default(),
            max_outer: default_max_outer(),
            tol: default_tol(),
            inner: default_inner(),
            range_grid: default_range_grid(),
            range_iters: default_range_iters(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be positive, got {v}")))
            }
        };
        pos("far_field_range", self.far_field_range)?;
        pos("min_range", self.min_range)?;
        pos("tol", self.tol)?;
        pos("threshold alpha", self.threshold.alpha)?;
        for (name, v) in [("lambda_init", self.lambda_init), ("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.min_range >= self.far_field_range {
            return Err(Error::domain("min_range must be below far_field_range"));
        }
        if self.n_angles == 0 {
            return Err(Error::domain("n_angles must be positive"));
        }
        if !(0.0..1.0).contains(&self.threshold.rel_floor) {
            return Err(Error::domain("threshold rel_floor must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Immutable problem data shared by every step.
#[derive(Debug, Clone)]
pub struct AlternatingContext {
    pub config: AlternatingConfig,
    pub angles: AngularGrid,
    r: Vec<f64>,
    theta: Vec<f64>,
    visibility: DMatrix<f64>,
    projector: AmbientProjector,
    ambient: DMatrix<f64>,
    /// Measured channels.
    pub y: Vec<DVector<f64>>,
    yp: Vec<DVector<f64>>,
    scales: Vec<(f64, f64)>,
}

impl AlternatingContext {
    pub fn new(grid: &FloorGrid, y: Vec<DVector<f64>>, config: AlternatingConfig) -> Result<Self> {
        config.validate()?;
        if y.is_empty() {
            return Err(Error::domain("no measurement channels"));
        }
        for ch in &y {
            if ch.len() != grid.len() {
                return Err(Error::Dimension { expected: grid.len(), got: ch.len() });
            }
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("measurement contains non-finite values"));
            }
        }
        let angles = AngularGrid::new(config.n_angles)?;
        let visibility = build_visibility_matrix(grid, angles.angles())?;
        let ambient = build_ambient_basis(grid, config.near_field)?;
        let projector = AmbientProjector::new(&ambient)?;
        let yp = y.iter().map(|v| projector.project(v)).collect();
        let (r, theta) = grid.pixel_centers().iter().map(|p| (p.r, p.theta)).unzip();
        let mut ctx = Self { config, angles, r, theta, visibility, projector, ambient, y, yp, scales: Vec::new() };
        ctx.scales = ctx.compute_scales();
        Ok(ctx)
    }

    pub fn channels(&self) -> usize {
        self.y.len()
    }

    pub fn n_bins(&self) -> usize {
        self.angles.len()
    }

    fn column(&self, n: usize, rho: f64) -> DVector<f64> {
        let a = self.angles.angles()[n];
        DVector::from_fn(self.r.len(), |m, _| {
            if self.visibility[(m, n)] == 0.0 {
                0.0
            } else {
                rho / dist2_unchecked(self.r[m], self.theta[m], rho, a)
            }
        })
    }

    /// `∂/∂ρ` of [`column`](Self::column).
    fn column_derivative(&self, n: usize, rho: f64) -> DVector<f64> {
        let a = self.angles.angles()[n];
        DVector::from_fn(self.r.len(), |m, _| {
            if self.visibility[(m, n)] == 0.0 {
                0.0
            } else {
                let (r, th) = (self.r[m], self.theta[m]);
                let d2 = dist2_unchecked(r, th, rho, a);
                let dd = 2.0 * rho + 2.0 * r * (a - th).cos();
                1.0 / d2 - rho * dd / (d2 * d2)
            }
        })
    }

    /// `V ⊙ D(ρ̄)` for a support.
    pub fn transport(&self, support: &TargetSupport) -> DMatrix<f64> {
        let params = support.bin_params();
        let cols = par::map_range(self.n_bins(), |n| self.column(n, params[n].0));
        DMatrix::from_columns(&cols)
    }

    pub fn ambient(&self) -> &DMatrix<f64> {
        &self.ambient
    }

    fn smoothing(&self, support: &TargetSupport) -> DMatrix<f64> {
        let n = self.n_bins();
        let mut q = DMatrix::zeros(n, n);
        for k in 0..n.saturating_sub(1) {
            if support.is_background(k) && support.is_background(k + 1) {
                q[(k, k)] += 1.0;
                q[(k + 1, k + 1)] += 1.0;
                q[(k, k + 1)] -= 1.0;
                q[(k + 1, k)] -= 1.0;
            }
        }
        q
    }

    fn wavelet(&self, lambda: f64) -> WaveletL1 {
        WaveletL1::new(self.n_bins(), lambda, true)
    }

    /// `‖W·pad(K⊥ᵀ y⊥)‖_∞` and `‖K⊥‖²` at the far-field range, per channel.
    fn compute_scales(&self) -> Vec<(f64, f64)> {
        let sup = TargetSupport::background(self.n_bins(), self.config.far_field_range).expect("valid range");
        let kp = self.projector.project_columns(&self.transport(&sup));
        let w = self.wavelet(1.0);
        let h = kp.tr_mul(&kp);
        let lip = h.symmetric_eigenvalues().max();
        self.yp
            .iter()
            .map(|yp| {
                let g = kp.tr_mul(yp);
                let c = w.coefficients(&g);
                (c.iter().fold(0.0_f64, |a, v| a.max(v.abs())), lip)
            })
            .collect()
    }

    /// Absolute `[λ_init, λ1, λ2]` per channel.
    pub fn lambdas(&self) -> Vec<[f64; 3]> {
        let c = &self.config;
        self.scales.iter().map(|&(w, lip)| [c.lambda_init * w, c.lambda1 * w, c.lambda2 * lip]).collect()
    }

    /// Ambient coefficients that best fit `y − Ks` for one channel.
    pub fn ambient_coefficients(&self, channel: usize, k: &DMatrix<f64>, s: &DVector<f64>) -> DVector<f64> {
        self.projector.coefficients(&(&self.y[channel] - k * s))
    }
}

/// Per-channel profile and regularization weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub s: DVector<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Iterate of the alternating scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingState {
    pub iteration: usize,
    pub channels: Vec<ChannelState>,
    pub support: TargetSupport,
    /// Objective after every completed outer iteration (entry 0 is the
    /// state right after counting).
    pub trace: Vec<f64>,
    /// Whether the first range update still has to seed from the grid.
    pub seeded: bool,
}

impl AlternatingState {
    /// State with the given per-channel profiles on `support`, using the
    /// context's regularization weights.
    pub fn new(ctx: &AlternatingContext, profiles: Vec<DVector<f64>>, support: TargetSupport) -> Result<Self> {
        if profiles.len() != ctx.channels() {
            return Err(Error::Dimension { expected: ctx.channels(), got: profiles.len() });
        }
        if support.n_bins() != ctx.n_bins() {
            return Err(Error::Dimension { expected: ctx.n_bins(), got: support.n_bins() });
        }
        let mut channels = Vec::with_capacity(profiles.len());
        for (s, l) in profiles.into_iter().zip(ctx.lambdas()) {
            if s.len() != ctx.n_bins() {
                return Err(Error::Dimension { expected: ctx.n_bins(), got: s.len() });
            }
            channels.push(ChannelState { s, lambda1: l[1], lambda2: l[2] });
        }
        let mut state = Self { iteration: 0, channels, support, trace: Vec::new(), seeded: false };
        state.trace.push(objective(ctx, &state));
        Ok(state)
    }
}

fn channel_objective(ctx: &AlternatingContext, ch: usize, k: &DMatrix<f64>, st: &ChannelState, q: &DMatrix<f64>) -> f64 {
    let r = &ctx.yp[ch] - ctx.projector.project(&(k * &st.s));
    0.5 * r.norm_squared() + ctx.wavelet(st.lambda1).value(&st.s) + st.lambda2 * st.s.dot(&(q * &st.s))
}

/// `Σ_ch ½‖P⊥(y − K(ρ̄)s)‖² + λ1‖Ws‖₁ + λ2‖Bs‖²`.
pub fn objective(ctx: &AlternatingContext, state: &AlternatingState) -> f64 {
    let k = ctx.transport(&state.support);
    let q = ctx.smoothing(&state.support);
    (0..ctx.channels()).map(|ch| channel_objective(ctx, ch, &k, &state.channels[ch], &q)).sum()
}

/// Far-field initialization for one channel: wavelet-sparse nonnegative
/// profile with every wedge at `ρ_FF`. Returns `(s⁰, c⁰, trace)`.
pub fn init_far_field(
    ctx: &AlternatingContext,
    channel: usize,
    lambda: f64,
    opts: SolveOptions,
) -> Result<(DVector<f64>, DVector<f64>, Vec<f64>)> {
    let sup = TargetSupport::background(ctx.n_bins(), ctx.config.far_field_range)?;
    let k = ctx.transport(&sup);
    let q = Quadratic::new(&k, &ctx.projector, &ctx.y[channel], None);
    let out = mfista(&q, &ctx.wavelet(lambda), DVector::zeros(ctx.n_bins()), opts);
    let c = ctx.ambient_coefficients(channel, &k, &out.x);
    Ok((out.x, c, out.trace))
}

/// Maximal runs of bins with `s_n > κ_n` (and above the relative floor).
/// Every target starts at `far_field_range`.
pub fn count_targets(
    s0: &DVector<f64>,
    angles: &AngularGrid,
    thr: &ThresholdSpec,
    far_field_range: f64,
) -> Result<TargetSupport> {
    if s0.len() != angles.len() {
        return Err(Error::Dimension { expected: angles.len(), got: s0.len() });
    }
    if s0.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::domain("profile must be finite and nonnegative"));
    }
    let n = s0.len();
    let l = thr.half_window as isize;
    let floor = thr.rel_floor * s0.max();
    let above: Vec<bool> = (0..n as isize)
        .map(|i| {
            let sum: f64 = (i - l..=i + l).filter(|&j| j >= 0 && (j as usize) < n).map(|j| s0[j as usize]).sum();
            let kappa = thr.alpha * sum / (2 * l + 1) as f64;
            let v = s0[i as usize];
            v > kappa && v > floor && v > 0.0
        })
        .collect();
    let mut runs: Vec<Range<usize>> = Vec::new();
    let mut start = None;
    for (i, &a) in above.iter().chain(std::iter::once(&false)).enumerate() {
        match (a, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    let runs = runs.into_iter().filter(|r| r.len() >= thr.min_width);
    TargetSupport::from_bins(angles, runs.map(|r| (r, far_field_range)), far_field_range)
}

/// Data-fit pieces of the range subproblem: per channel, the projected
/// measurement with the fixed background removed, and the current profile.
struct RangeProblem<'a> {
    ctx: &'a AlternatingContext,
    targets: Vec<Target>,
    data: Vec<(DVector<f64>, DVector<f64>)>,
}

impl<'a> RangeProblem<'a> {
    fn new(ctx: &'a AlternatingContext, state: &AlternatingState) -> Self {
        let sup = &state.support;
        let ff = sup.far_field_range();
        let data = state
            .channels
            .iter()
            .enumerate()
            .map(|(ch, st)| {
                let mut bg = DVector::zeros(ctx.r.len());
                for n in 0..ctx.n_bins() {
                    if sup.is_background(n) && st.s[n] != 0.0 {
                        bg += ctx.column(n, ff) * st.s[n];
                    }
                }
                (&ctx.yp[ch] - ctx.projector.project(&bg), st.s.clone())
            })
            .collect();
        Self { ctx, targets: sup.targets().to_vec(), data }
    }

    /// `P⊥ Σ_{n∈T_j} s_n K_n(ρ)` or its `ρ`-derivative.
    fn contribution(&self, ch: usize, j: usize, rho: f64, deriv: bool) -> DVector<f64> {
        let s = &self.data[ch].1;
        let mut u = DVector::zeros(self.ctx.r.len());
        for n in self.targets[j].bins.clone() {
            if s[n] != 0.0 {
                let col = if deriv { self.ctx.column_derivative(n, rho) } else { self.ctx.column(n, rho) };
                u += col * s[n];
            }
        }
        self.ctx.projector.project(&u)
    }

    /// `(f, ∂f/∂ρ, ∂f/∂z)` with `z` laid out channel-major.
    fn evaluate(&self, rho: &[f64], z: &[f64], with_grad: bool) -> (f64, Vec<f64>, Vec<f64>) {
        let nt = self.targets.len();
        let mut f = 0.0;
        let mut g_rho = vec![0.0; nt];
        let mut g_z = vec![0.0; nt * self.data.len()];
        for ch in 0..self.data.len() {
            let us: Vec<DVector<f64>> = (0..nt).map(|j| self.contribution(ch, j, rho[j], false)).collect();
            let mut r = self.data[ch].0.clone();
            for j in 0..nt {
                r -= &us[j] * z[ch * nt + j];
            }
            f += 0.5 * r.norm_squared();
            if with_grad {
                for j in 0..nt {
                    g_z[ch * nt + j] = -r.dot(&us[j]);
                    let du = self.contribution(ch, j, rho[j], true);
                    g_rho[j] -= z[ch * nt + j] * r.dot(&du);
                }
            }
        }
        (f, g_rho, g_z)
    }

    /// Best `z ≥ 0` for fixed ranges and the resulting objective and range
    /// gradient.
    fn reduced(&self, rho: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let nt = self.targets.len();
        let mut z = vec![0.0; nt * self.data.len()];
        for ch in 0..self.data.len() {
            let us: Vec<DVector<f64>> = (0..nt).map(|j| self.contribution(ch, j, rho[j], false)).collect();
            let g = DMatrix::from_fn(nt, nt, |i, j| us[i].dot(&us[j]));
            let h = DVector::from_fn(nt, |i, _| us[i].dot(&self.data[ch].0));
            let zc = nnls(&g, &h);
            z[ch * nt..(ch + 1) * nt].copy_from_slice(zc.as_slice());
        }
        let (f, g, _) = self.evaluate(rho, &z, true);
        (f, g, z)
    }

}

/// `argmin_{x≥0} ½xᵀGx − hᵀx` for a small positive semidefinite `G`
/// (Lawson–Hanson active set in Gram form).
fn nnls(g: &DMatrix<f64>, h: &DVector<f64>) -> DVector<f64> {
    let n = h.len();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = g.diagonal().max().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * h.amax();
    let solve = |passive: &[bool]| -> Option<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let gs = DMatrix::from_fn(idx.len(), idx.len(), |a, b| g[(idx[a], idx[b])]);
        let hs = DVector::from_fn(idx.len(), |a, _| h[idx[a]]);
        // tiny ridge keeps rank-deficient blocks solvable
        let ridge = DMatrix::identity(idx.len(), idx.len()) * (1e-13 * scale);
        let zs = (gs + ridge).cholesky()?.solve(&hs);
        let mut z = DVector::zeros(n);
        for (a, &i) in idx.iter().enumerate() {
            z[i] = zs[a];
        }
        Some(z)
    };
    for _ in 0..3 * n + 10 {
        let w = h - g * &x;
        let cand = (0..n).filter(|&i| !passive[i] && w[i] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(k) = cand else { break };
        passive[k] = true;
        loop {
            let Some(z) = solve(&passive) else {
                passive[k] = false;
                return x;
            };
            if (0..n).all(|i| !passive[i] || z[i] > 0.0) {
                x = z;
                break;
            }
            // step back to the boundary and drop the variables that hit it
            let mut alpha = 1.0_f64;
            for i in 0..n {
                if passive[i] && z[i] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[i]));
                }
            }
            for i in 0..n {
                x[i] += alpha * (z[i] - x[i]);
                if passive[i] && x[i] <= 1e-15 * scale {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

/// Seed every target's range from a log-spaced grid. At each candidate the
/// whole profile is refitted by nonnegative least squares with the
/// background smoothing term, targets taken one at a time. Returns the
/// ranges and the refitted profiles.
fn seed_ranges(ctx: &AlternatingContext, state: &AlternatingState) -> (Vec<f64>, Vec<DVector<f64>>) {
    let cfg = &ctx.config;
    let ng = cfg.range_grid;
    let grid: Vec<f64> =
        (0..ng).map(|k| cfg.min_range * (cfg.far_field_range / cfg.min_range).powf(k as f64 / (ng - 1) as f64)).collect();
    let mut support = state.support.clone();
    let q = ctx.smoothing(&support);
    let mut kp = ctx.projector.project_columns(&ctx.transport(&support));
    let mut gram = kp.tr_mul(&kp);
    let mut profiles: Vec<DVector<f64>> = state.channels.iter().map(|c| c.s.clone()).collect();
    for j in 0..support.n_targets() {
        let bins = support.targets()[j].bins.clone();
        let fits = par::map_slice(&grid, |&r| {
            let mut kj = kp.clone();
            for n in bins.clone() {
                kj.set_column(n, &ctx.projector.project(&ctx.column(n, r)));
            }
            let mut g = gram.clone();
            for n in bins.clone() {
                let col = kj.tr_mul(&kj.column(n));
                g.set_column(n, &col);
                g.set_row(n, &col.transpose());
            }
            let mut value = 0.0;
            let xs: Vec<DVector<f64>> = (0..ctx.channels())
                .map(|ch| {
                    let gc = &g + &q * (2.0 * state.channels[ch].lambda2);
                    let h = kj.tr_mul(&ctx.yp[ch]);
                    let x = nnls(&gc, &h);
                    value += 0.5 * x.dot(&(&gc * &x)) - h.dot(&x);
                    x
                })
                .collect();
            (value, xs)
        });
        let (k, _) = fits.iter().enumerate().min_by(|a, b| a.1 .0.total_cmp(&b.1 .0)).expect("nonempty grid");
        let mut ranges = support.ranges();
        ranges[j] = grid[k];
        support.set_ranges(&ranges);
        for n in bins {
            kp.set_column(n, &ctx.projector.project(&ctx.column(n, grid[k])));
        }
        gram = kp.tr_mul(&kp);
        profiles = fits[k].1.clone();
    }
    (support.ranges(), profiles)
}

/// Outcome of a range update.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeUpdate {
    pub ranges: Vec<f64>,
    /// Per-target scale factors, channel-major.
    pub z: Vec<f64>,
    /// Profiles with `z` folded into the target blocks (and, on a seeding
    /// update, the target blocks refitted at the chosen ranges).
    pub profiles: Vec<DVector<f64>>,
    /// Data fit at the entry state and at the returned one.
    pub entry_objective: f64,
    pub objective: f64,
}

/// Data-fit of the range subproblem and its gradient with respect to the
/// target ranges and scale factors, at an arbitrary `(ρ̄, z)`.
pub fn range_objective_and_gradient(
    ctx: &AlternatingContext,
    state: &AlternatingState,
    rho: &[f64],
    z: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let nt = state.support.n_targets();
    if rho.len() != nt {
        return Err(Error::Dimension { expected: nt, got: rho.len() });
    }
    if z.len() != nt * state.channels.len() {
        return Err(Error::Dimension { expected: nt * state.channels.len(), got: z.len() });
    }
    let p = RangeProblem::new(ctx, state);
    Ok(p.evaluate(rho, z, true))
}

/// Range update: projected gradient with Armijo backtracking over `ρ̄ ≥ c`,
/// with `z ≥ 0` eliminated exactly at every trial point. Before the first
/// update of a run (`!state.seeded`) the ranges are seeded from a log-spaced
/// grid with the profile refitted at each candidate, since the far-field
/// profile is a poor shape to slide in range. The data fit of the returned
/// state never exceeds that of the entry state.
pub fn update_ranges(ctx: &AlternatingContext, state: &AlternatingState) -> Result<RangeUpdate> {
    let nt = state.support.n_targets();
    let nch = state.channels.len();
    let rho0 = state.support.ranges();
    let mut p = RangeProblem::new(ctx, state);
    let ones = vec![1.0; nt * nch];
    let (entry, _, _) = p.evaluate(&rho0, &ones, false);
    let profiles0: Vec<DVector<f64>> = state.channels.iter().map(|c| c.s.clone()).collect();
    let unchanged =
        RangeUpdate { ranges: rho0.clone(), z: ones, profiles: profiles0, entry_objective: entry, objective: entry };
    if nt == 0 {
        return Ok(unchanged);
    }
    let all_zero = p.data.iter().all(|(_, s)| p.targets.iter().all(|t| t.bins.clone().all(|n| s[n] == 0.0)));
    if all_zero {
        return Ok(unchanged);
    }
    let cmin = ctx.config.min_range;
    let mut rho = rho0.clone();

    if !state.seeded && ctx.config.range_grid >= 2 {
        let (seeded, profiles) = seed_ranges(ctx, state);
        rho = seeded;
        for (d, s) in p.data.iter_mut().zip(profiles) {
            d.1 = s;
        }
        // background changed as well, so rebuild the data pieces
        let mut st = state.clone();
        st.support.set_ranges(&rho);
        for (c, d) in st.channels.iter_mut().zip(&p.data) {
            c.s = d.1.clone();
        }
        p = RangeProblem::new(ctx, &st);
    }

    let (mut f, mut g, mut z) = p.reduced(&rho);
    // the first trial step moves the fastest-changing range by a quarter
    let mut step = {
        let m = rho.iter().zip(&g).map(|(r, gi)| gi.abs() / r).fold(0.0, f64::max);
        if m > 0.0 {
            0.25 / m
        } else {
            0.0
        }
    };
    for _ in 0..ctx.config.range_iters {
        if step == 0.0 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = rho.iter().zip(&g).map(|(r, gi)| (r - step * gi).max(cmin)).collect();
            let dec: f64 = rho.iter().zip(&trial).zip(&g).map(|((r, t), gi)| gi * (r - t)).sum();
            if dec <= 0.0 {
                break;
            }
            let (ft, gt, zt) = p.reduced(&trial);
            if ft <= f - 1e-4 * dec {
                // Barzilai–Borwein guess for the next step
                let s: Vec<f64> = trial.iter().zip(&rho).map(|(a, b)| a - b).collect();
                let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
                let ss: f64 = s.iter().map(|a| a * a).sum();
                let rel = (f - ft) / f.max(f64::MIN_POSITIVE);
                rho = trial;
                f = ft;
                g = gt;
                z = zt;
                step = if sy > 0.0 { ss / sy } else { step * 2.0 };
                accepted = true;
                if rel < 1e-12 {
                    step = 0.0;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    if f > entry {
        return Ok(unchanged);
    }
    let profiles = p
        .data
        .iter()
        .enumerate()
        .map(|(ch, (_, s))| {
            let mut s = s.clone();
            for (j, t) in p.targets.iter().enumerate() {
                for n in t.bins.clone() {
                    s[n] *= z[ch * nt + j];
                }
            }
            s
        })
        .collect();
    Ok(RangeUpdate { ranges: rho, z, profiles, entry_objective: entry, objective: f })
}

/// Profile update at fixed ranges for one channel, warm-started from the
/// current profile. Returns the new profile and its solver trace.
pub fn update_profile(
    ctx: &AlternatingContext,
    state: &AlternatingState,
    channel: usize,
) -> Result<(DVector<f64>, Vec<f64>)> {
    let k = ctx.transport(&state.support);
    let q = ctx.smoothing(&state.support);
    let st = &state.channels[channel];
    profile_step(ctx, channel, &k, &q, st)
}

fn profile_step(
    ctx: &AlternatingContext,
    channel: usize,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    st: &ChannelState,
) -> Result<(DVector<f64>, Vec<f64>)> {
    let quad = Quadratic::new(k, &ctx.projector, &ctx.y[channel], Some(&(q * st.lambda2)));
    let out = mfista(&quad, &ctx.wavelet(st.lambda1), st.s.clone(), ctx.config.inner);
    Ok((out.x, out.trace))
}

/// Per-channel reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    /// Angular profile `ŝ`, radiosity integrated over each wedge.
    pub s: Vec<f64>,
    /// Ambient coefficients `[c_FF, c_NF]`.
    pub c: Vec<f64>,
    /// Far-field initialization `s⁰`.
    pub s_init: Vec<f64>,
    pub initial_residual_norm: f64,
    pub final_residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub angles: Vec<f64>,
    pub channels: Vec<ChannelEstimate>,
    pub support: TargetSupport,
    /// Objective after counting and after every outer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Counting found nothing and a single full-span far-field target was used.
    pub fallback_support: bool,
    pub lambdas: Vec<[f64; 3]>,
}

impl ReconstructionResult {
    pub fn ranges(&self) -> Vec<f64> {
        self.support.ranges()
    }

    pub fn support_angles(&self) -> AngularGrid {
        AngularGrid::new(self.angles.len()).expect("nonempty grid")
    }
}

/// Grayscale alternating reconstruction.
pub fn alternate(grid: &FloorGrid, y: &DVector<f64>, config: &AlternatingConfig) -> Result<ReconstructionResult> {
    run(AlternatingContext::new(grid, vec![y.clone()], config.clone())?)
}

/// Three-channel reconstruction sharing ranges and target support.
pub fn alternate_rgb(grid: &FloorGrid, y: &[DVector<f64>; 3], config: &AlternatingConfig) -> Result<ReconstructionResult> {
    run(AlternatingContext::new(grid, y.to_vec(), config.clone())?)
}

fn residual_norm(ctx: &AlternatingContext, ch: usize, k: &DMatrix<f64>, s: &DVector<f64>) -> f64 {
    let c = ctx.ambient_coefficients(ch, k, s);
    (&ctx.y[ch] - &ctx.ambient * c - k * s).norm()
}

fn run(ctx: AlternatingContext) -> Result<ReconstructionResult> {
    let cfg = ctx.config.clone();
    let nch = ctx.channels();
    let lambdas = ctx.lambdas();

    // 1. far-field initialization per channel
    let inits = par::try_map_range(nch, |ch| init_far_field(&ctx, ch, lambdas[ch][0], cfg.inner))?;
    let ff_support = TargetSupport::background(ctx.n_bins(), cfg.far_field_range)?;
    let k_ff = ctx.transport(&ff_support);

    // 2. counting on the channel mean
    let mean = inits.iter().fold(DVector::zeros(ctx.n_bins()), |acc, (s, _, _)| acc + s) / nch as f64;
    let mut support = count_targets(&mean, &ctx.angles, &cfg.threshold, cfg.far_field_range)?;
    let fallback = support.n_targets() == 0;
    if fallback {
        support = TargetSupport::from_bins(&ctx.angles, [(0..ctx.n_bins(), cfg.far_field_range)], cfg.far_field_range)?;
    }

    let mut state = AlternatingState::new(&ctx, inits.iter().map(|i| i.0.clone()).collect(), support)?;
    let mut j = state.trace[0];

    let mut converged = false;
    for t in 1..=cfg.max_outer {
        state.iteration = t;

        // 3. ranges; z is folded into the target blocks of s
        let upd = update_ranges(&ctx, &state)?;
        state.seeded = true;
        let mut trial = state.clone();
        trial.support.set_ranges(&upd.ranges);
        for (cs, s) in trial.channels.iter_mut().zip(upd.profiles) {
            cs.s = s;
        }
        let jt = objective(&ctx, &trial);
        if jt <= j {
            state.support = trial.support;
            state.channels = trial.channels;
            j = jt;
        }

        // 4. profiles, channels in parallel
        let k = ctx.transport(&state.support);
        let q = ctx.smoothing(&state.support);
        let profiles = par::try_map_range(nch, |ch| profile_step(&ctx, ch, &k, &q, &state.channels[ch]))?;
        for (cs, (s, _)) in state.channels.iter_mut().zip(profiles) {
            cs.s = s;
        }
        let j_new = objective(&ctx, &state).min(j);
        let change = (j - j_new).abs() / j.abs().max(f64::MIN_POSITIVE);
        j = j_new;
        state.trace.push(j);
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    let k = ctx.transport(&state.support);
    let estimates = (0..nch)
        .map(|ch| {
            let s = &state.channels[ch].s;
            ChannelEstimate {
                s: s.as_slice().to_vec(),
                c: ctx.ambient_coefficients(ch, &k, s).as_slice().to_vec(),
                s_init: inits[ch].0.as_slice().to_vec(),
                initial_residual_norm: residual_norm(&ctx, ch, &k_ff, &inits[ch].0),
                final_residual_norm: residual_norm(&ctx, ch, &k, s),
            }
        })
        .collect();
    Ok(ReconstructionResult {
        angles: ctx.angles.angles().to_vec(),
        channels: estimates,
        support: state.support,
        trace: state.trace,
        iterations: state.iteration,
        converged,
        fallback_support: fallback,
        lambdas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ForwardOperator;
    use crate::simulate::{render_scene, HiddenScene, WedgeTarget};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> FloorGrid {
        FloorGrid::square(32, 0.2).unwrap()
    }

    fn wedge(center: f64, extent: f64, range: f64, radiosity: Vec<f64>) -> WedgeTarget {
        WedgeTarget { center, extent, range, radiosity, height: None }
    }

    /// Noiseless data from the discrete model itself.
    fn consistent(grid: &FloorGrid, n: usize, scene: &HiddenScene) -> (Vec<DVector<f64>>, TargetSupport, Vec<DVector<f64>>) {
        let angles = AngularGrid::new(n).unwrap();
        let sup = scene.support(&angles, DEFAULT_FAR_FIELD_RANGE).unwrap();
        let op = ForwardOperator::assemble(grid, &angles, &sup, None).unwrap();
        let profiles: Vec<_> = (0..scene.channels()).map(|ch| scene.discrete_profile(&angles, ch)).collect();
        let y = profiles
            .iter()
            .zip(&scene.ambient)
            .map(|(s, c)| op.apply(s, &DVector::from_row_slice(c)).unwrap())
            .collect();
        (y, sup, profiles)
    }

    fn one_target(range: f64) -> HiddenScene {
        HiddenScene {
            targets: vec![wedge(3.0 * PI / 8.0, PI / 12.0, range, vec![100.0])],
            emitters: vec![],
            ambient: vec![[50.0, 0.0]],
            near_field: None,
        }
    }

    fn two_targets(channels: usize) -> HiddenScene {
        let (a, b) = if channels == 1 { (vec![80.0], vec![150.0]) } else { (vec![120.0, 30.0, 10.0], vec![10.0, 60.0, 140.0]) };
        HiddenScene {
            targets: vec![wedge(PI / 4.0, PI / 15.0, 0.4, a), wedge(0.4 * PI, PI / 15.0, 1.0, b)],
            emitters: vec![],
            ambient: vec![[50.0, 0.0]; channels],
            near_field: None,
        }
    }

    fn bump(n: usize, runs: &[(Range<usize>, f64)]) -> DVector<f64> {
        let mut s = DVector::zeros(n);
        for (r, v) in runs {
            for i in r.clone() {
                s[i] = *v;
            }
        }
        s
    }

    /// Non-increasing up to 1e-9 of the starting objective.
    fn is_monotone(trace: &[f64]) -> bool {
        let tol = 1e-9 * trace.first().map_or(0.0, |v| v.abs());
        trace.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    #[test]
    fn single_bump_is_one_target() {
        let angles = AngularGrid::new(40).unwrap();
        let s = bump(40, &[(15..22, 3.0)]);
        let sup = count_targets(&s, &angles, &ThresholdSpec::default(), 100.0).unwrap();
        assert_eq!(sup.n_targets(), 1);
        assert_eq!(sup.targets()[0].bins, 15..22);
        assert!(sup.ranges().iter().all(|&r| r == 100.0));
    }

    #[test]
    fn two_bumps_are_two_targets() {
        let angles = AngularGrid::new(60).unwrap();
        let s = bump(60, &[(5..12, 2.0), (30..41, 5.0)]);
        let sup = count_targets(&s, &angles, &ThresholdSpec::default(), 100.0).unwrap();
        let bins: Vec<_> = sup.targets().iter().map(|t| t.bins.clone()).collect();
        assert_eq!(bins, vec![5..12, 30..41]);
    }

    #[test]
    fn zero_profile_has_no_targets() {
        let angles = AngularGrid::new(20).unwrap();
        let sup = count_targets(&DVector::zeros(20), &angles, &ThresholdSpec::default(), 100.0).unwrap();
        assert_eq!(sup.n_targets(), 0);
        assert!(count_targets(&DVector::from_element(20, -1.0), &angles, &ThresholdSpec::default(), 100.0).is_err());
    }

    #[test]
    fn narrow_runs_are_kept_by_default() {
        let angles = AngularGrid::new(30).unwrap();
        let s = bump(30, &[(10..11, 4.0)]);
        let thr = ThresholdSpec { rel_floor: 0.0, ..Default::default() };
        assert_eq!(count_targets(&s, &angles, &thr, 100.0).unwrap().targets()[0].bins, 10..11);
        let thr = ThresholdSpec { min_width: 2, ..thr };
        assert_eq!(count_targets(&s, &angles, &thr, 100.0).unwrap().n_targets(), 0);
    }

    #[test]
    fn ambient_only_gives_empty_profile() {
        let g = grid();
        let y = DVector::from_element(g.len(), 50.0);
        let ctx = AlternatingContext::new(&g, vec![y], AlternatingConfig::new(45)).unwrap();
        let (s, c, trace) = init_far_field(&ctx, 0, 1e-3, SolveOptions::default()).unwrap();
        assert!(s.norm() < 1e-6, "{}", s.norm());
        assert_relative_eq!(c[0], 50.0, epsilon = 1e-6);
        assert!(c[1].abs() < 1e-6);
        assert!(is_monotone(&trace));
    }

    #[test]
    fn far_target_peaks_in_its_bins() {
        let g = grid();
        let scene = HiddenScene { targets: vec![wedge(0.3 * PI, PI / 20.0, 20.0, vec![500.0])], ..one_target(1.0) };
        let (y, sup, _) = consistent(&g, 45, &scene);
        let ctx = AlternatingContext::new(&g, y, AlternatingConfig::new(45)).unwrap();
        let (s, _, trace) = init_far_field(&ctx, 0, ctx.lambdas()[0][0], SolveOptions::default()).unwrap();
        assert!(sup.targets()[0].bins.contains(&s.argmax().0));
        assert!(is_monotone(&trace));
    }

    #[test]
    fn two_stripe_initialization_counts_two() {
        let g = FloorGrid::square(48, 0.2).unwrap();
        let scene = two_targets(1);
        let y = render_scene(&g, &scene, 6).unwrap();
        let cfg = AlternatingConfig::new(90);
        let ctx = AlternatingContext::new(&g, y, cfg.clone()).unwrap();
        let (s0, _, _) = init_far_field(&ctx, 0, ctx.lambdas()[0][0], cfg.inner).unwrap();
        let sup = count_targets(&s0, &ctx.angles, &cfg.threshold, cfg.far_field_range).unwrap();
        assert_eq!(sup.n_targets(), 2);
    }

    #[test]
    fn zero_profile_leaves_ranges_alone() {
        let g = grid();
        let (y, sup, _) = consistent(&g, 45, &one_target(0.5));
        let ctx = AlternatingContext::new(&g, y, AlternatingConfig::new(45)).unwrap();
        let state = AlternatingState::new(&ctx, vec![DVector::zeros(45)], sup.clone()).unwrap();
        let upd = update_ranges(&ctx, &state).unwrap();
        assert_eq!(upd.ranges, sup.ranges());
        assert_eq!(upd.objective, upd.entry_objective);
    }

    #[test]
    fn range_recovered_from_twice_the_truth() {
        let g = grid();
        let (y, mut sup, s) = consistent(&g, 45, &one_target(0.5));
        sup.set_ranges(&[1.0]);
        let ctx = AlternatingContext::new(&g, y, AlternatingConfig::new(45)).unwrap();
        for seeded in [false, true] {
            let mut state = AlternatingState::new(&ctx, s.clone(), sup.clone()).unwrap();
            state.seeded = seeded;
            let upd = update_ranges(&ctx, &state).unwrap();
            assert!((upd.ranges[0] - 0.5).abs() < 0.01, "seeded={seeded}: {:?}", upd.ranges);
            assert!(upd.objective <= upd.entry_objective);
            assert!(upd.z.iter().all(|&z| z >= 0.0));
        }
    }

    #[test]
    fn range_gradient_matches_finite_differences() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (y, sup, _) = consistent(&g, 45, &two_targets(3));
        let ctx = AlternatingContext::new(&g, y, AlternatingConfig::new(45)).unwrap();
        for _ in 0..20 {
            let profiles = (0..3).map(|_| DVector::from_fn(45, |_, _| rng.random_range(0.0..3.0))).collect();
            let state = AlternatingState::new(&ctx, profiles, sup.clone()).unwrap();
            let rho: Vec<f64> = (0..2).map(|_| rng.random_range(0.2..3.0)).collect();
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(0.2..2.0)).collect();
            let (_, g_rho, g_z) = range_objective_and_gradient(&ctx, &state, &rho, &z).unwrap();
            let f = |r: &[f64], z: &[f64]| range_objective_and_gradient(&ctx, &state, r, z).unwrap().0;
            for j in 0..2 {
                let h = 1e-5 * rho[j];
                let (mut a, mut b) = (rho.clone(), rho.clone());
                a[j] += h;
                b[j] -= h;
                let fd = (f(&a, &z) - f(&b, &z)) / (2.0 * h);
                assert_relative_eq!(g_rho[j], fd, max_relative = 1e-5, epsilon = 1e-8 * f(&rho, &z));
            }
            for k in 0..6 {
                let h = 1e-5 * z[k];
                let (mut a, mut b) = (z.clone(), z.clone());
                a[k] += h;
                b[k] -= h;
                let fd = (f(&rho, &a) - f(&rho, &b)) / (2.0 * h);
                assert_relative_eq!(g_z[k], fd, max_relative = 1e-5, epsilon = 1e-8 * f(&rho, &z));
            }
        }
    }

    #[test]
    fn unregularized_profile_matches_truth() {
        let g = grid();
        let scene = HiddenScene { targets: vec![wedge(3.0 * PI / 8.0, PI / 8.0, 0.5, vec![100.0])], ..one_target(1.0) };
        let (y, sup, s) = consistent(&g, 16, &scene);
        let mut cfg = AlternatingConfig::new(16);
        cfg.lambda1 = 0.0;
        cfg.lambda2 = 0.0;
        cfg.inner = SolveOptions { max_iter: 200_000, tol: 1e-12 };
        let ctx = AlternatingContext::new(&g, y, cfg).unwrap();
        let state = AlternatingState::new(&ctx, vec![DVector::zeros(16)], sup).unwrap();
        let (got, trace) = update_profile(&ctx, &state, 0).unwrap();
        assert!((&got - &s[0]).norm() <= 1e-4 * s[0].norm(), "{}", (&got - &s[0]).norm() / s[0].norm());
        assert!(is_monotone(&trace));
    }

    #[test]
    fn heavy_penalty_zeroes_the_profile() {
        let g = grid();
        let (y, sup, s) = consistent(&g, 45, &one_target(0.5));
        let mut cfg = AlternatingConfig::new(45);
        cfg.lambda1 = 1e6;
        let ctx = AlternatingContext::new(&g, y, cfg).unwrap();
        let state = AlternatingState::new(&ctx, s, sup).unwrap();
        let (got, _) = update_profile(&ctx, &state, 0).unwrap();
        assert!(got.norm() < 1e-9);
    }

    #[test]
    fn profile_update_lowers_the_objective() {
        let g = grid();
        let (y, sup, _) = consistent(&g, 45, &two_targets(1));
        let ctx = AlternatingContext::new(&g, y, AlternatingConfig::new(45)).unwrap();
        let mut state = AlternatingState::new(&ctx, vec![DVector::from_element(45, 1.0)], sup).unwrap();
        let before = objective(&ctx, &state);
        let (s, trace) = update_profile(&ctx, &state, 0).unwrap();
        assert!(s.iter().all(|&v| v >= 0.0));
        assert!(is_monotone(&trace));
        state.channels[0].s = s;
        assert!(objective(&ctx, &state) < before);
    }

    fn check_invariants(r: &ReconstructionResult, cfg: &AlternatingConfig) {
        assert!(r.channels.iter().all(|c| c.s.iter().all(|&v| v >= 0.0)));
        assert!(r.ranges().iter().all(|&p| p >= cfg.min_range));
        assert!(is_monotone(&r.trace), "{:?}", r.trace);
    }

    #[test]
    fn single_target_end_to_end() {
        let g = FloorGrid::square(48, 0.2).unwrap();
        let scene = HiddenScene { targets: vec![wedge(3.0 * PI / 8.0, PI / 12.0, 0.3, vec![200.0])], ..one_target(1.0) };
        let cfg = AlternatingConfig::new(90);

        // data from the discrete model: the far-field fit is poor and the
        // alternation removes nearly all of its residual
        let (y, _, _) = consistent(&g, 90, &scene);
        let r = alternate(&g, &y[0], &cfg).unwrap();
        check_invariants(&r, &cfg);
        let c = &r.channels[0];
        assert!(c.final_residual_norm < 0.1 * c.initial_residual_norm, "{} vs {}", c.final_residual_norm, c.initial_residual_norm);

        // rendered data: the residual cannot go much below that of the true
        // scene pushed through the discrete model
        let y = render_scene(&g, &scene, 6).unwrap();
        let r = alternate(&g, &y[0], &cfg).unwrap();
        check_invariants(&r, &cfg);
        assert_eq!(r.support.n_targets(), 1);
        assert!((r.ranges()[0] - 0.3).abs() < 0.05 * 0.3, "{:?}", r.ranges());
        let angles = r.support_angles();
        let op = ForwardOperator::assemble(&g, &angles, &scene.support(&angles, 100.0).unwrap(), None).unwrap();
        let floor = (&y[0] - op.apply(&scene.discrete_profile(&angles, 0), &DVector::from_vec(vec![50.0, 0.0])).unwrap()).norm();
        assert!(r.channels[0].final_residual_norm < 1.1 * floor);
    }

    #[test]
    fn two_targets_keep_their_order() {
        let g = FloorGrid::square(48, 0.2).unwrap();
        let scene = two_targets(1);
        let y = render_scene(&g, &scene, 6).unwrap();
        let cfg = AlternatingConfig::new(90);
        let r = alternate(&g, &y[0], &cfg).unwrap();
        check_invariants(&r, &cfg);
        let truth = scene.support(&r.support_angles(), cfg.far_field_range).unwrap();
        assert_eq!(r.support.n_targets(), 2);
        for (got, want) in r.support.targets().iter().zip(truth.targets()) {
            assert!(got.bins.start.abs_diff(want.bins.start) <= 3 && got.bins.end.abs_diff(want.bins.end) <= 3);
        }
        let rho = r.ranges();
        assert!(rho[0] < rho[1]);
    }

    #[test]
    fn reconstruction_is_a_fixed_point() {
        // one more range/profile sweep from the returned state barely moves it
        let g = grid();
        let (y, _, _) = consistent(&g, 45, &one_target(0.4));
        let cfg = AlternatingConfig::new(45);
        let r = alternate(&g, &y[0], &cfg).unwrap();
        assert!(r.converged);
        let ctx = AlternatingContext::new(&g, y, cfg).unwrap();
        let s1 = DVector::from_vec(r.channels[0].s.clone());
        let mut state = AlternatingState::new(&ctx, vec![s1.clone()], r.support.clone()).unwrap();
        state.seeded = true;
        let upd = update_ranges(&ctx, &state).unwrap();
        assert_relative_eq!(upd.ranges[0], r.ranges()[0], max_relative = 1e-3);
        state.support.set_ranges(&upd.ranges);
        let (s2, _) = update_profile(&ctx, &state, 0).unwrap();
        assert!((&s2 - &s1).norm() < 1e-3 * s1.norm(), "{}", (&s2 - &s1).norm() / s1.norm());
    }

    #[test]
    fn identical_channels_match_grayscale() {
        let g = grid();
        let (y, _, _) = consistent(&g, 45, &one_target(0.4));
        let cfg = AlternatingConfig::new(45);
        let gray = alternate(&g, &y[0], &cfg).unwrap();
        let rgb = alternate_rgb(&g, &[y[0].clone(), y[0].clone(), y[0].clone()], &cfg).unwrap();
        for c in &rgb.channels {
            assert_eq!(c.s, rgb.channels[0].s);
        }
        for (a, b) in rgb.ranges().iter().zip(gray.ranges()) {
            assert_relative_eq!(*a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn dark_channel_stays_dark() {
        let g = grid();
        let mut scene = two_targets(3);
        for t in &mut scene.targets {
            t.radiosity[1] = 0.0;
        }
        let (y, _, _) = consistent(&g, 45, &scene);
        let cfg = AlternatingConfig::new(45);
        let rgb = alternate_rgb(&g, &[y[0].clone(), y[1].clone(), y[2].clone()], &cfg).unwrap();
        let dark: f64 = rgb.channels[1].s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lit: f64 = rgb.channels[0].s.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(dark < 1e-6 * lit, "{dark} vs {lit}");
    }
}
