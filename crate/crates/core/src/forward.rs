//! Discrete forward operator: visibility `V`, range falloff `D(ρ̄)` and the
//! ambient basis `A = [1, a_NF]`, mapping angular radiosity `s` and ambient
//! coefficients `c` to a noiseless photograph `A·c + (V ⊙ D)·s`.
//!
//! Entries of `s` are radiosity integrated over one angular wedge, so
//! `(V ⊙ D)·s` approximates the continuous angular integral with one sample
//! per wedge evaluated at pixel centers.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{build_visibility_matrix, dist2_unchecked, FloorGrid};
use crate::par;

/// Range used for background bins when none is configured.
pub const DEFAULT_FAR_FIELD_RANGE: f64 = 100.0;

/// `N` equiangular wedges covering `(0, span]`, represented by their centers.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    angles: Vec<f64>,
    wedge_width: f64,
}

impl AngularGrid {
    /// Wedges over the quarter plane `(0, π/2]`.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_span(n, FRAC_PI_2)
    }

    pub fn with_span(n: usize, span: f64) -> Result<Self> {
        ensure_finite("span", span)?;
        if n == 0 {
            return Err(Error::domain("angular grid needs at least one wedge"));
        }
        if span <= 0.0 || span > std::f64::consts::PI {
            return Err(Error::domain(format!("angular span {span} outside (0, π]")));
        }
        let w = span / n as f64;
        let angles = (0..n).map(|k| (k as f64 + 0.5) * w).collect();
        Ok(Self { angles, wedge_width: w })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn wedge_width(&self) -> f64 {
        self.wedge_width
    }

    pub fn span(&self) -> f64 {
        self.wedge_width * self.len() as f64
    }

    /// Wedge containing `alpha` (clamped to the grid).
    pub fn bin_of(&self, alpha: f64) -> usize {
        let k = (alpha / self.wedge_width).floor();
        (k.max(0.0) as usize).min(self.len() - 1)
    }

    /// Bins whose centers fall in `[lo, hi)`.
    pub fn bins_in(&self, lo: f64, hi: f64) -> Range<usize> {
        let start = self.angles.iter().position(|&a| a >= lo).unwrap_or(self.len());
        let end = self.angles.iter().position(|&a| a >= hi).unwrap_or(self.len());
        start..end.max(start)
    }
}

/// One hidden target: a contiguous run of angular bins at a single range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub bins: Range<usize>,
    /// Angular center `ᾱ`, radians.
    pub center: f64,
    /// Angular extent `Δ`, radians.
    pub extent: f64,
    /// Range `ρ̄`, meters.
    pub range: f64,
    /// Known height `η̄`, meters, if the height-aware kernel is used.
    pub height: Option<f64>,
}

/// Partition of the angular bins into disjoint targets plus background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSupport {
    n_bins: usize,
    targets: Vec<Target>,
    far_field_range: f64,
}

impl TargetSupport {
    /// Every bin is background at `far_field_range`.
    pub fn background(n_bins: usize, far_field_range: f64) -> Result<Self> {
        Self::new(n_bins, Vec::new(), far_field_range)
    }

    pub fn new(n_bins: usize, mut targets: Vec<Target>, far_field_range: f64) -> Result<Self> {
        ensure_finite("far-field range", far_field_range)?;
        if far_field_range <= 0.0 {
            return Err(Error::domain("far-field range must be positive"));
        }
        targets.sort_by_key(|t| t.bins.start);
        for t in &targets {
            ensure_finite("target range", t.range)?;
            if t.range <= 0.0 {
                return Err(Error::domain(format!("target range must be positive, got {}", t.range)));
            }
            if t.bins.is_empty() || t.bins.end > n_bins {
                return Err(Error::domain(format!("target bins {:?} invalid for {n_bins} bins", t.bins)));
            }
            if let Some(h) = t.height {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::domain(format!("target height must be positive, got {h}")));
                }
            }
        }
        if targets.windows(2).any(|w| w[1].bins.start < w[0].bins.end) {
            return Err(Error::domain("targets overlap in angle"));
        }
        Ok(Self { n_bins, targets, far_field_range })
    }

    /// Targets given as `(bins, range)` pairs, with centers and extents
    /// derived from `angles`.
    pub fn from_bins(
        angles: &AngularGrid,
        specs: impl IntoIterator<Item = (Range<usize>, f64)>,
        far_field_range: f64,
    ) -> Result<Self> {
        let w = angles.wedge_width();
        let targets = specs
            .into_iter()
            .map(|(bins, range)| Target {
                center: 0.5 * (bins.start + bins.end) as f64 * w,
                extent: bins.len() as f64 * w,
                bins,
                range,
                height: None,
            })
            .collect();
        Self::new(angles.len(), targets, far_field_range)
    }

    /// Targets given by angular center and extent: bin `n` belongs to a
    /// target when `α_n ∈ [ᾱ − Δ/2, ᾱ + Δ/2)`.
    pub fn from_angular(
        angles: &AngularGrid,
        specs: impl IntoIterator<Item = (f64, f64, f64, Option<f64>)>,
        far_field_range: f64,
    ) -> Result<Self> {
        let mut targets = Vec::new();
        for (center, extent, range, height) in specs {
            let bins = angles.bins_in(center - 0.5 * extent, center + 0.5 * extent);
            if bins.is_empty() {
                return Err(Error::domain(format!(
                    "target at {center} with extent {extent} covers no bin centers"
                )));
            }
            targets.push(Target { bins, center, extent, range, height });
        }
        Self::new(angles.len(), targets, far_field_range)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn targets_mut(&mut self) -> &mut [Target] {
        &mut self.targets
    }

    pub fn far_field_range(&self) -> f64 {
        self.far_field_range
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t.range).collect()
    }

    pub fn set_ranges(&mut self, ranges: &[f64]) {
        for (t, &r) in self.targets.iter_mut().zip(ranges) {
            t.range = r;
        }
    }

    /// Index of the target owning bin `n`.
    pub fn owner(&self, n: usize) -> Option<usize> {
        self.targets.iter().position(|t| t.bins.contains(&n))
    }

    pub fn is_background(&self, n: usize) -> bool {
        self.owner(n).is_none()
    }

    /// Per-bin `(range, height)`.
    pub fn bin_params(&self) -> Vec<(f64, Option<f64>)> {
        let mut out = vec![(self.far_field_range, None); self.n_bins];
        for t in &self.targets {
            for n in t.bins.clone() {
                out[n] = (t.range, t.height);
            }
        }
        out
    }
}

/// `ρ/d²` for a hidden floor point, or `ρ·arctan(η/d)/d` for a vertical
/// segment of known height `η`.
#[inline]
pub fn falloff_kernel(rho: f64, d2: f64, height: Option<f64>) -> f64 {
    match height {
        None => rho / d2,
        Some(h) => {
            let d = d2.sqrt();
            rho * (h / d).atan() / d
        }
    }
}

fn check_d2(d2: f64, r: f64, rho: f64) -> Result<()> {
    if d2 <= 1e-24 * (r * r + rho * rho).max(1e-300) {
        Err(Error::Singular(format!(
            "hidden point at range {rho} coincides with a floor sample at range {r}"
        )))
    } else {
        Ok(())
    }
}

fn falloff_columns(
    grid: &FloorGrid,
    angles: &AngularGrid,
    params: &[(f64, Option<f64>)],
) -> Result<DMatrix<f64>> {
    let centers = grid.pixel_centers();
    let alphas = angles.angles();
    let cols = par::try_map_range(alphas.len(), |n| {
        let (rho, h) = params[n];
        centers
            .iter()
            .map(|p| {
                let d2 = dist2_unchecked(p.r, p.theta, rho, alphas[n]);
                check_d2(d2, p.r, rho)?;
                Ok(falloff_kernel(rho, d2, h))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(DMatrix::from_iterator(centers.len(), alphas.len(), cols.into_iter().flatten()))
}

/// `M × N` falloff matrix: entry `(m, n) = ρ̄_j / d²(r_m, θ_m, ρ̄_j, α_n)` with
/// `j` the target owning bin `n`; background bins use the far-field range.
pub fn build_falloff_matrix(
    grid: &FloorGrid,
    angles: &AngularGrid,
    support: &TargetSupport,
) -> Result<DMatrix<f64>> {
    check_support(angles, support)?;
    let params: Vec<_> = support.bin_params().into_iter().map(|(r, _)| (r, None)).collect();
    falloff_columns(grid, angles, &params)
}

/// Falloff matrix for targets of known height: `ρ̄_j·arctan(η̄_j/d)/d`.
/// Every target must carry a height; background bins keep the point kernel.
pub fn build_falloff_matrix_known_height(
    grid: &FloorGrid,
    angles: &AngularGrid,
    support: &TargetSupport,
) -> Result<DMatrix<f64>> {
    check_support(angles, support)?;
    if let Some(t) = support.targets().iter().find(|t| t.height.is_none()) {
        return Err(Error::domain(format!("target at bins {:?} has no height", t.bins)));
    }
    falloff_columns(grid, angles, &support.bin_params())
}

fn check_support(angles: &AngularGrid, support: &TargetSupport) -> Result<()> {
    if support.n_bins() != angles.len() {
        return Err(Error::Dimension { expected: angles.len(), got: support.n_bins() });
    }
    Ok(())
}

/// A visible-side point light at floor level producing the near-field
/// ambient pattern `1/|p − q|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearFieldSource {
    pub x: f64,
    pub y: f64,
}

impl NearFieldSource {
    pub fn pattern_at(&self, x: f64, y: f64) -> f64 {
        1.0 / ((x - self.x).powi(2) + (y - self.y).powi(2))
    }
}

/// `M × 2` ambient basis `[1, a_NF]`; the second column is zero without a
/// near-field source.
pub fn build_ambient_basis(grid: &FloorGrid, nf: Option<NearFieldSource>) -> Result<DMatrix<f64>> {
    let m = grid.len();
    let mut a = DMatrix::zeros(m, 2);
    a.column_mut(0).fill(1.0);
    if let Some(src) = nf {
        ensure_finite("near-field x", src.x)?;
        ensure_finite("near-field y", src.y)?;
        if src.y < 0.0 {
            return Err(Error::domain("near-field source must be on the visible side"));
        }
        for (k, p) in grid.pixel_centers().iter().enumerate() {
            let [x, y] = p.to_cartesian();
            let v = src.pattern_at(x, y);
            if !v.is_finite() {
                return Err(Error::Singular("near-field source sits on a pixel center".into()));
            }
            a[(k, 1)] = v;
        }
    }
    Ok(a)
}

/// Assembled single-channel forward operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperator {
    pub visibility: DMatrix<f64>,
    pub falloff: DMatrix<f64>,
    pub ambient: DMatrix<f64>,
}

impl ForwardOperator {
    pub fn new(visibility: DMatrix<f64>, falloff: DMatrix<f64>, ambient: DMatrix<f64>) -> Result<Self> {
        if visibility.shape() != falloff.shape() {
            return Err(Error::Dimension { expected: visibility.len(), got: falloff.len() });
        }
        if ambient.nrows() != visibility.nrows() || ambient.ncols() != 2 {
            return Err(Error::Dimension { expected: visibility.nrows() * 2, got: ambient.len() });
        }
        if visibility.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::domain("visibility matrix must be binary"));
        }
        if falloff.iter().any(|&d| !(d.is_finite() && d >= 0.0)) {
            return Err(Error::domain("falloff entries must be finite and nonnegative"));
        }
        Ok(Self { visibility, falloff, ambient })
    }

    /// Build `V`, `D(ρ̄)` and `A` for a grid, angular grid and support.
    pub fn assemble(
        grid: &FloorGrid,
        angles: &AngularGrid,
        support: &TargetSupport,
        nf: Option<NearFieldSource>,
    ) -> Result<Self> {
        let v = build_visibility_matrix(grid, angles.angles())?;
        let d = if support.targets().iter().any(|t| t.height.is_some()) {
            build_falloff_matrix_known_height(grid, angles, support)?
        } else {
            build_falloff_matrix(grid, angles, support)?
        };
        Self::new(v, d, build_ambient_basis(grid, nf)?)
    }

    pub fn n_pixels(&self) -> usize {
        self.visibility.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.visibility.ncols()
    }

    /// `V ⊙ D`.
    pub fn transport(&self) -> DMatrix<f64> {
        self.visibility.component_mul(&self.falloff)
    }

    /// `A·c + (V ⊙ D)·s`.
    pub fn apply(&self, s: &DVector<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
        apply_forward(self, s, c)
    }

    /// Debug dump: each of `V`, `D`, `A` as a `# name rows cols` header
    /// followed by row-major comma-separated rows.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        for (name, mat) in [("V", &self.visibility), ("D", &self.falloff), ("A", &self.ambient)] {
            crate::io::write_matrix(&mut w, name, mat)?;
        }
        Ok(())
    }
}

/// `A·c + (V ⊙ D)·s`.
pub fn apply_forward(op: &ForwardOperator, s: &DVector<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
    if s.len() != op.n_bins() {
        return Err(Error::Dimension { expected: op.n_bins(), got: s.len() });
    }
    if c.len() != 2 {
        return Err(Error::Dimension { expected: 2, got: c.len() });
    }
    if s.iter().any(|&v| v < 0.0) {
        return Err(Error::domain("radiosity must be nonnegative"));
    }
    Ok(&op.ambient * c + op.transport() * s)
}

/// Polar-pixel dictionary `[V⊙D(ρ_1·1), …, V⊙D(ρ_L·1)]`; column `ℓ·N + n`
/// is hidden polar pixel `(ρ_ℓ, α_n)`.
pub fn build_polar_dictionary(grid: &FloorGrid, angles: &AngularGrid, ranges: &[f64]) -> Result<DMatrix<f64>> {
    if ranges.is_empty() {
        return Err(Error::domain("polar dictionary needs at least one range"));
    }
    if ranges.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
        return Err(Error::domain("dictionary ranges must be positive"));
    }
    if ranges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("dictionary ranges must be strictly increasing"));
    }
    let v = build_visibility_matrix(grid, angles.angles())?;
    let (m, n) = (grid.len(), angles.len());
    let mut out = DMatrix::zeros(m, n * ranges.len());
    for (l, &rho) in ranges.iter().enumerate() {
        let d = falloff_columns(grid, angles, &vec![(rho, None); n])?;
        out.columns_mut(l * n, n).copy_from(&v.component_mul(&d));
    }
    Ok(out)
}

/// Three-channel operator sharing `V ⊙ D(ρ̄)` across channels:
/// `ỹ = [y_R; y_G; y_B]`, `s̃ = [s_R; s_G; s_B]`, `c̃ = [c_R; c_G; c_B]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedOperator {
    /// `3M × 3N` block diagonal.
    pub transport: DMatrix<f64>,
    /// `3M × 6` block diagonal.
    pub ambient: DMatrix<f64>,
}

pub const RGB_CHANNELS: usize = 3;

pub fn stack_rgb(op: &ForwardOperator) -> StackedOperator {
    let (m, n) = (op.n_pixels(), op.n_bins());
    let k = op.transport();
    let mut transport = DMatrix::zeros(RGB_CHANNELS * m, RGB_CHANNELS * n);
    let mut ambient = DMatrix::zeros(RGB_CHANNELS * m, 2 * RGB_CHANNELS);
    for ch in 0..RGB_CHANNELS {
        transport.view_mut((ch * m, ch * n), (m, n)).copy_from(&k);
        ambient.view_mut((ch * m, 2 * ch), (m, 2)).copy_from(&op.ambient);
    }
    StackedOperator { transport, ambient }
}

impl StackedOperator {
    pub fn apply(&self, s: &DVector<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
        if s.len() != self.transport.ncols() {
            return Err(Error::Dimension { expected: self.transport.ncols(), got: s.len() });
        }
        if c.len() != self.ambient.ncols() {
            return Err(Error::Dimension { expected: self.ambient.ncols(), got: c.len() });
        }
        Ok(&self.ambient * c + &self.transport * s)
    }
}
