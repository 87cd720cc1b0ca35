//! Synthetic measurements: sub-pixel quadrature of the continuous light
//! transport model plus additive white Gaussian noise.
//!
//! Intensities are pixel means (patch integral divided by pixel area), which
//! keeps them on the same scale as the pixel-center forward operator.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::forward::{falloff_kernel, AngularGrid, NearFieldSource, TargetSupport};
use crate::geometry::{hidden_xy, FloorGrid};
use crate::par;
use crate::quadrature::{clip_half_plane, GaussLegendre};

pub const DEFAULT_QUAD_ORDER: usize = 8;

/// Isotropic point source on the hidden floor: `c_s δ(ρ − ρ_s) δ(α − φ_s) δ(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEmitter {
    pub c_s: f64,
    pub rho_s: f64,
    pub phi_s: f64,
}

impl PointEmitter {
    pub fn new(c_s: f64, rho_s: f64, phi_s: f64) -> Result<Self> {
        let e = Self { c_s, rho_s, phi_s };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("emitter intensity", self.c_s)?;
        ensure_finite("emitter range", self.rho_s)?;
        ensure_finite("emitter angle", self.phi_s)?;
        if self.c_s < 0.0 {
            return Err(Error::domain("emitter intensity must be nonnegative"));
        }
        if self.rho_s <= 0.0 {
            return Err(Error::domain("emitter range must be positive"));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.phi_s) {
            return Err(Error::domain(format!("emitter angle {} outside [0, π]", self.phi_s)));
        }
        Ok(())
    }

    pub fn position(&self) -> [f64; 2] {
        hidden_xy(self.rho_s, self.phi_s)
    }
}

/// Additive white Gaussian noise of variance `sigma2` per snapshot; averaging
/// `frames` snapshots leaves variance `sigma2 / frames`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma2: f64,
    pub seed: u64,
    #[serde(default = "one")]
    pub frames: u32,
}

fn one() -> u32 {
    1
}

impl NoiseSpec {
    pub fn new(sigma2: f64, seed: u64, frames: u32) -> Result<Self> {
        let s = Self { sigma2, seed, frames };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("noise variance", self.sigma2)?;
        if self.sigma2 < 0.0 {
            return Err(Error::domain("noise variance must be nonnegative"));
        }
        if self.frames == 0 {
            return Err(Error::domain("frame count must be at least 1"));
        }
        Ok(())
    }

    pub fn effective_variance(&self) -> f64 {
        self.sigma2 / self.frames as f64
    }
}

/// Hidden target occupying `[center − extent/2, center + extent/2]` in angle at
/// a single range, with constant radiosity per unit angle in each channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeTarget {
    pub center: f64,
    pub extent: f64,
    pub range: f64,
    /// One value per channel.
    pub radiosity: Vec<f64>,
    #[serde(default)]
    pub height: Option<f64>,
}

impl WedgeTarget {
    pub fn bounds(&self) -> (f64, f64) {
        (self.center - 0.5 * self.extent, self.center + 0.5 * self.extent)
    }
}

/// Ground-truth scene: wedge targets, point emitters (same intensity in every
/// channel) and per-channel ambient coefficients `[c_FF, c_NF]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenScene {
    #[serde(default)]
    pub targets: Vec<WedgeTarget>,
    #[serde(default)]
    pub emitters: Vec<PointEmitter>,
    /// One `[c_FF, c_NF]` pair per channel; its length sets the channel count.
    pub ambient: Vec<[f64; 2]>,
    #[serde(default)]
    pub near_field: Option<NearFieldSource>,
}

impl HiddenScene {
    pub fn channels(&self) -> usize {
        self.ambient.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ch = self.channels();
        if ch != 1 && ch != 3 {
            return Err(Error::domain(format!("scene must have 1 or 3 channels, got {ch}")));
        }
        for v in self.ambient.iter().flatten() {
            ensure_finite("ambient coefficient", *v)?;
        }
        for e in &self.emitters {
            e.validate()?;
        }
        let mut spans = Vec::new();
        for t in &self.targets {
            for v in [t.center, t.extent, t.range] {
                ensure_finite("target parameter", v)?;
            }
            if t.extent <= 0.0 || t.range <= 0.0 {
                return Err(Error::domain("target extent and range must be positive"));
            }
            let (a, b) = t.bounds();
            if a < 0.0 || b > std::f64::consts::PI {
                return Err(Error::domain(format!("target [{a}, {b}] leaves the hidden half-plane")));
            }
            if t.radiosity.len() != ch {
                return Err(Error::Dimension { expected: ch, got: t.radiosity.len() });
            }
            if t.radiosity.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
                return Err(Error::domain("target radiosity must be finite and nonnegative"));
            }
            if let Some(h) = t.height {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::domain("target height must be positive"));
                }
            }
            spans.push((a, b));
        }
        spans.sort_by(|x, y| x.0.total_cmp(&y.0));
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::domain("scene targets overlap in angle"));
        }
        Ok(())
    }

    /// Discrete per-wedge radiosity `s_n` for one channel: radiosity times the
    /// angular overlap of wedge `n` with each target.
    pub fn discrete_profile(&self, angles: &AngularGrid, channel: usize) -> DVector<f64> {
        let w = angles.wedge_width();
        DVector::from_fn(angles.len(), |n, _| {
            let (lo, hi) = (n as f64 * w, (n + 1) as f64 * w);
            self.targets
                .iter()
                .map(|t| {
                    let (a, b) = t.bounds();
                    t.radiosity[channel] * (hi.min(b) - lo.max(a)).max(0.0)
                })
                .sum()
        })
    }

    /// Target support on `angles` matching this scene.
    pub fn support(&self, angles: &AngularGrid, far_field_range: f64) -> Result<TargetSupport> {
        TargetSupport::from_angular(
            angles,
            self.targets.iter().map(|t| (t.center, t.extent, t.range, t.height)),
            far_field_range,
        )
    }
}

/// Quadrature nodes over the part of `rect` on the nonnegative side of every
/// half-plane in `keep`. Fully inside pixels get the tensor rule; cut pixels
/// are clipped to a polygon and integrated by triangles.
pub(crate) fn clipped_rule(gl: &GaussLegendre, rect: [f64; 4], keep: &[[f64; 2]]) -> Vec<([f64; 2], f64)> {
    let [x0, x1, y0, y1] = rect;
    let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
    let side = |n: &[f64; 2], p: &[f64; 2]| n[0] * p[0] + n[1] * p[1];
    if keep.iter().all(|n| corners.iter().all(|p| side(n, p) >= 0.0)) {
        return gl.rectangle(x0, x1, y0, y1);
    }
    if keep.iter().any(|n| corners.iter().all(|p| side(n, p) <= 0.0)) {
        return Vec::new();
    }
    let mut poly = corners.to_vec();
    for n in keep {
        poly = clip_half_plane(&poly, *n);
        if poly.len() < 3 {
            return Vec::new();
        }
    }
    gl.convex_polygon(&poly)
}

/// Normal of the half-plane `θ ≥ angle`.
pub(crate) fn beyond(angle: f64) -> [f64; 2] {
    [-angle.sin(), angle.cos()]
}

/// Normal of the half-plane `θ ≤ angle`.
pub(crate) fn before(angle: f64) -> [f64; 2] {
    [angle.sin(), -angle.cos()]
}

pub(crate) fn check_outside(rect: [f64; 4], q: [f64; 2]) -> Result<()> {
    let [x0, x1, y0, y1] = rect;
    let eps = 1e-9 * ((x1 - x0) + (y1 - y0));
    if (x0 - eps..=x1 + eps).contains(&q[0]) && (y0 - eps..=y1 + eps).contains(&q[1]) {
        return Err(Error::Singular("emitter lies inside a camera pixel".into()));
    }
    Ok(())
}

/// Pixel-mean intensity from a point emitter, with or without the edge.
/// Without the edge the emitter stays where it is and only the shadow is
/// removed.
pub fn render_point_emitter(
    grid: &FloorGrid,
    emitter: &PointEmitter,
    edge_present: bool,
    quad_order: usize,
) -> Result<DVector<f64>> {
    emitter.validate()?;
    if quad_order == 0 {
        return Err(Error::domain("quadrature order must be at least 1"));
    }
    let gl = GaussLegendre::new(quad_order);
    let q = emitter.position();
    let keep: &[[f64; 2]] = if edge_present { &[beyond(emitter.phi_s)] } else { &[] };
    let area = grid.pixel_area();
    let vals = par::try_map_range(grid.len(), |m| {
        let rect = grid.pixel_rect(m);
        check_outside(rect, q)?;
        let sum: f64 = clipped_rule(&gl, rect, keep)
            .iter()
            .map(|(p, w)| w / ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)))
            .sum();
        Ok::<_, Error>(emitter.c_s * sum / area)
    })?;
    Ok(DVector::from_vec(vals))
}

fn point_kernel_at(p: [f64; 2], rho: f64, alpha: f64, height: Option<f64>) -> f64 {
    let q = hidden_xy(rho, alpha);
    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
    falloff_kernel(rho, d2, height)
}

/// Per-pixel geometric factor of one wedge target with unit radiosity:
/// pixel mean of `∫_a^{min(b, θ)} kernel(ρ, α) dα`.
fn wedge_factor(grid: &FloorGrid, t: &WedgeTarget, gl: &GaussLegendre, ang: &GaussLegendre) -> Vec<f64> {
    let (a, b) = t.bounds();
    let area = grid.pixel_area();
    par::map_range(grid.len(), |m| {
        let rect = grid.pixel_rect(m);
        let partial: f64 = clipped_rule(gl, rect, &[beyond(a), before(b)])
            .iter()
            .map(|(p, w)| {
                let theta = p[1].atan2(p[0]);
                w * ang.integrate(a, theta.min(b), |al| point_kernel_at(*p, t.range, al, t.height))
            })
            .sum();
        let full: f64 = clipped_rule(gl, rect, &[beyond(b)])
            .iter()
            .map(|(p, w)| w * ang.integrate(a, b, |al| point_kernel_at(*p, t.range, al, t.height)))
            .sum();
        (partial + full) / area
    })
}

/// Render every channel of `scene`: ambient `c_FF + c_NF·a_NF` plus shadowed
/// light from each wedge target and point emitter, all integrated over pixel
/// patches.
pub fn render_scene(grid: &FloorGrid, scene: &HiddenScene, quad_order: usize) -> Result<Vec<DVector<f64>>> {
    scene.validate()?;
    if quad_order == 0 {
        return Err(Error::domain("quadrature order must be at least 1"));
    }
    let gl = GaussLegendre::new(quad_order);
    let ang = GaussLegendre::new(2 * quad_order);
    let m = grid.len();
    let area = grid.pixel_area();

    let nf = match scene.near_field {
        Some(src) => {
            if src.y < 0.0 {
                return Err(Error::domain("near-field source must be on the visible side"));
            }
            par::try_map_range(m, |k| {
                let rect = grid.pixel_rect(k);
                check_outside(rect, [src.x, src.y])?;
                let [x0, x1, y0, y1] = rect;
                let s: f64 = gl.rectangle(x0, x1, y0, y1).iter().map(|(p, w)| w * src.pattern_at(p[0], p[1])).sum();
                Ok::<_, Error>(s / area)
            })?
        }
        None => vec![0.0; m],
    };

    let mut shared = vec![0.0; m];
    for e in &scene.emitters {
        let v = render_point_emitter(grid, e, true, quad_order)?;
        shared.iter_mut().zip(v.iter()).for_each(|(a, b)| *a += b);
    }

    let factors: Vec<Vec<f64>> = scene.targets.iter().map(|t| wedge_factor(grid, t, &gl, &ang)).collect();

    let out = (0..scene.channels())
        .map(|ch| {
            let [c_ff, c_nf] = scene.ambient[ch];
            DVector::from_fn(m, |k, _| {
                let mut v = c_ff + c_nf * nf[k] + shared[k];
                for (t, f) in scene.targets.iter().zip(&factors) {
                    v += t.radiosity[ch] * f[k];
                }
                v
            })
        })
        .collect();
    Ok(out)
}

/// `clean + N(0, σ²/frames)` per pixel from a generator seeded with `spec.seed`.
pub fn add_noise(clean: &DVector<f64>, spec: &NoiseSpec) -> Result<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    add_noise_with(clean, spec, &mut rng)
}

/// Noise for several channels drawn from one seeded stream, channel by channel.
pub fn add_noise_channels(clean: &[DVector<f64>], spec: &NoiseSpec) -> Result<Vec<DVector<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    clean.iter().map(|c| add_noise_with(c, spec, &mut rng)).collect()
}

fn add_noise_with(clean: &DVector<f64>, spec: &NoiseSpec, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    spec.validate()?;
    let var = spec.effective_variance();
    if var == 0.0 {
        return Ok(clean.clone());
    }
    let normal = Normal::new(0.0, var.sqrt()).map_err(|e| Error::domain(e.to_string()))?;
    Ok(clean.map(|v| v + normal.sample(rng)))
}

/// `10·log10(mean(clean²) / (σ²/frames))`. Infinite when the noise is zero.
pub fn snr_db(clean: &DVector<f64>, spec: &NoiseSpec) -> Result<f64> {
    spec.validate()?;
    if clean.is_empty() || clean.iter().all(|&v| v == 0.0) {
        return Err(Error::domain("SNR undefined for a zero signal"));
    }
    let power = clean.norm_squared() / clean.len() as f64;
    Ok(10.0 * (power / spec.effective_variance()).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ForwardOperator;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    /// Adaptive Simpson in 2D over a rectangle with a visibility mask; slow
    /// but independent of the Gauss–Legendre machinery.
    fn adaptive_pixel(rect: [f64; 4], f: &dyn Fn(f64, f64) -> f64, tol: f64) -> f64 {
        fn simpson1(a: f64, b: f64, g: &dyn Fn(f64) -> f64) -> f64 {
            (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b))
        }
        fn adapt(a: f64, b: f64, g: &dyn Fn(f64) -> f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let c = 0.5 * (a + b);
            let l = simpson1(a, c, g);
            let r = simpson1(c, b, g);
            if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
                l + r + (l + r - whole) / 15.0
            } else {
                adapt(a, c, g, l, 0.5 * tol, depth - 1) + adapt(c, b, g, r, 0.5 * tol, depth - 1)
            }
        }
        let [x0, x1, y0, y1] = rect;
        let inner = |x: f64| {
            let g = |y: f64| f(x, y);
            adapt(y0, y1, &g, simpson1(y0, y1, &g), tol, 40)
        };
        adapt(x0, x1, &inner, simpson1(x0, x1, &inner), tol * (y1 - y0), 40)
    }

    #[test]
    fn fully_shadowed_fov_is_dark() {
        let g = FloorGrid::new(6, 6, [0.2, 0.2], [0.1, 0.0]).unwrap();
        let (_, hi) = g.theta_range();
        let e = PointEmitter::new(5.0, 1.0, 1.2).unwrap();
        assert!(hi < 1.2);
        let y = render_point_emitter(&g, &e, true, 8).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        assert!(render_point_emitter(&g, &e, false, 8).unwrap().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn no_edge_render_is_linear_in_intensity() {
        let g = FloorGrid::square(7, 0.2).unwrap();
        let y1 = render_point_emitter(&g, &PointEmitter::new(1.5, 0.8, 0.7).unwrap(), false, 8).unwrap();
        let y2 = render_point_emitter(&g, &PointEmitter::new(3.0, 0.8, 0.7).unwrap(), false, 8).unwrap();
        assert_relative_eq!(y2, y1 * 2.0, max_relative = 1e-14);
    }

    #[test]
    fn point_render_matches_adaptive_oracle() {
        let g = FloorGrid::square(5, 0.2).unwrap();
        let e = PointEmitter::new(1.0, 0.5, FRAC_PI_4).unwrap();
        let y8 = render_point_emitter(&g, &e, true, 8).unwrap();
        let q = e.position();
        for m in 0..g.len() {
            let rect = g.pixel_rect(m);
            let f = |x: f64, y: f64| {
                if y.atan2(x) >= e.phi_s {
                    1.0 / ((x - q[0]).powi(2) + (y - q[1]).powi(2))
                } else {
                    0.0
                }
            };
            let corners = [[rect[0], rect[2]], [rect[1], rect[2]], [rect[0], rect[3]], [rect[1], rect[3]]];
            let vis = corners.iter().filter(|p| p[1].atan2(p[0]) >= e.phi_s).count();
            if vis == 4 {
                let oracle = adaptive_pixel(rect, &f, 1e-13) / g.pixel_area();
                assert_relative_eq!(y8[m], oracle, max_relative = 1e-8);
            } else if vis > 0 {
                // cut pixel: refinement converges
                let y16 = render_point_emitter(&g, &e, true, 16).unwrap();
                let y32 = render_point_emitter(&g, &e, true, 32).unwrap();
                assert_relative_eq!(y32[m], y16[m], max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn shadowed_pixels_are_exactly_zero() {
        let g = FloorGrid::square(16, 0.2).unwrap();
        let e = PointEmitter::new(1.0, 1.0, FRAC_PI_3).unwrap();
        let y = render_point_emitter(&g, &e, true, 6).unwrap();
        for m in 0..g.len() {
            let [x0, x1, y0, y1] = g.pixel_rect(m);
            if [[x0, y0], [x1, y0], [x0, y1], [x1, y1]].iter().all(|p: &[f64; 2]| p[1].atan2(p[0]) < e.phi_s) {
                assert_eq!(y[m], 0.0);
            }
        }
    }

    #[test]
    fn refinement_converges_away_from_shadow() {
        let g = FloorGrid::square(9, 0.2).unwrap();
        let e = PointEmitter::new(2.0, 1.3, 0.4).unwrap();
        let a = render_point_emitter(&g, &e, false, 8).unwrap();
        let b = render_point_emitter(&g, &e, false, 16).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-8);
    }

    #[test]
    fn emitter_on_a_pixel_is_singular() {
        // φ = π with ρ chosen to land on the +x axis inside the first pixel row
        let g = FloorGrid::new(4, 4, [0.2, 0.2], [0.0, 0.0]).unwrap();
        let e = PointEmitter::new(1.0, 0.1, std::f64::consts::PI).unwrap();
        assert!(matches!(render_point_emitter(&g, &e, false, 4), Err(Error::Singular(_))));
    }

    fn ambient_scene(c1: f64) -> HiddenScene {
        HiddenScene { targets: vec![], emitters: vec![], ambient: vec![[c1, 0.0]], near_field: None }
    }

    #[test]
    fn empty_scene_is_uniform() {
        let g = FloorGrid::square(8, 0.2).unwrap();
        let y = render_scene(&g, &ambient_scene(3.25), 8).unwrap();
        assert!(y[0].iter().all(|&v| v == 3.25));
    }

    #[test]
    fn superposition_of_targets() {
        let g = FloorGrid::square(10, 0.16).unwrap();
        let t1 = WedgeTarget { center: 0.5, extent: 0.2, range: 0.6, radiosity: vec![1.0], height: None };
        let t2 = WedgeTarget { center: 1.1, extent: 0.3, range: 1.2, radiosity: vec![2.0], height: None };
        let mut both = ambient_scene(0.7);
        both.targets = vec![t1.clone(), t2.clone()];
        let mut s1 = ambient_scene(0.0);
        s1.targets = vec![t1];
        let mut s2 = ambient_scene(0.0);
        s2.targets = vec![t2];
        let y = &render_scene(&g, &both, 8).unwrap()[0];
        let y1 = &render_scene(&g, &s1, 8).unwrap()[0];
        let y2 = &render_scene(&g, &s2, 8).unwrap()[0];
        let sum = y1 + y2 + DVector::from_element(g.len(), 0.7);
        assert_relative_eq!(*y, sum, max_relative = 1e-13);
    }

    #[test]
    fn render_agrees_with_discrete_operator_at_truth() {
        let g = FloorGrid::square(24, 0.16).unwrap();
        let angles = AngularGrid::new(90).unwrap();
        let w = angles.wedge_width();
        let mut scene = ambient_scene(20.0);
        scene.targets = vec![WedgeTarget { center: 30.0 * w, extent: 12.0 * w, range: 0.8, radiosity: vec![4.0], height: None }];
        let y = &render_scene(&g, &scene, 8).unwrap()[0];
        let sup = scene.support(&angles, 100.0).unwrap();
        let op = ForwardOperator::assemble(&g, &angles, &sup, None).unwrap();
        let s = scene.discrete_profile(&angles, 0);
        let pred = op.apply(&s, &DVector::from_vec(vec![20.0, 0.0])).unwrap();
        let rel = (y - pred).norm() / y.norm();
        assert!(rel < 1e-3, "relative residual {rel}");
    }

    #[test]
    fn discrete_profile_integrates_radiosity() {
        let angles = AngularGrid::new(45).unwrap();
        let mut scene = ambient_scene(0.0);
        scene.targets = vec![WedgeTarget { center: 0.6, extent: 0.25, range: 1.0, radiosity: vec![3.0], height: None }];
        let s = scene.discrete_profile(&angles, 0);
        assert_relative_eq!(s.sum(), 0.75, max_relative = 1e-12);
        assert!(s.iter().all(|&v| v <= 3.0 * angles.wedge_width() + 1e-15));
    }

    #[test]
    fn scene_validation() {
        let mut s = ambient_scene(1.0);
        s.targets = vec![
            WedgeTarget { center: 0.5, extent: 0.3, range: 1.0, radiosity: vec![1.0], height: None },
            WedgeTarget { center: 0.6, extent: 0.3, range: 1.0, radiosity: vec![1.0], height: None },
        ];
        assert!(s.validate().is_err());
        s.targets.pop();
        s.targets[0].radiosity = vec![1.0, 2.0];
        assert!(s.validate().is_err());
        s.ambient = vec![[1.0, 0.0]; 2];
        assert!(s.validate().is_err());
        assert!(NoiseSpec::new(-1.0, 0, 1).is_err());
        assert!(NoiseSpec::new(1.0, 0, 0).is_err());
        assert!(PointEmitter::new(1.0, 0.0, 0.3).is_err());
    }

    #[test]
    fn near_field_ambient_is_pixel_average() {
        let g = FloorGrid::square(4, 0.2).unwrap();
        let src = NearFieldSource { x: 0.3, y: 0.25 };
        let mut scene = ambient_scene(0.0);
        scene.ambient = vec![[0.0, 1.0]];
        scene.near_field = Some(src);
        let y = &render_scene(&g, &scene, 10).unwrap()[0];
        for m in 0..g.len() {
            let oracle = adaptive_pixel(g.pixel_rect(m), &|x, y| src.pattern_at(x, y), 1e-12) / g.pixel_area();
            assert_relative_eq!(y[m], oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn noise_identity_and_determinism() {
        let clean = DVector::from_fn(1000, |i, _| i as f64 * 0.01);
        let zero = NoiseSpec::new(0.0, 9, 1).unwrap();
        assert_eq!(add_noise(&clean, &zero).unwrap(), clean);
        let spec = NoiseSpec::new(2.0, 42, 4).unwrap();
        let a = add_noise(&clean, &spec).unwrap();
        let b = add_noise(&clean, &spec).unwrap();
        assert_eq!(a, b);
        let c = add_noise(&clean, &NoiseSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_variance_statistics() {
        let clean = DVector::zeros(100_000);
        for (sigma2, frames) in [(1.0, 1), (10.0, 4), (0.3, 20)] {
            let spec = NoiseSpec::new(sigma2, 7, frames).unwrap();
            let y = add_noise(&clean, &spec).unwrap();
            let mean = y.mean();
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
            let target = spec.effective_variance();
            assert!((var / target - 1.0).abs() < 0.03, "var {var} vs {target}");
        }
    }

    #[test]
    fn snr_definition() {
        let spec = NoiseSpec::new(4.0, 0, 1).unwrap();
        let clean = DVector::from_element(10, 2.0);
        assert_relative_eq!(snr_db(&clean, &spec).unwrap(), 0.0, epsilon = 1e-12);
        let louder = &clean * 10f64.sqrt();
        assert_relative_eq!(snr_db(&louder, &spec).unwrap(), 10.0, epsilon = 1e-12);
        assert!(snr_db(&DVector::zeros(3), &spec).is_err());
    }

    #[test]
    fn snr_regression_fixture() {
        // frozen from a known-good build
        let g = FloorGrid::square(12, 0.2).unwrap();
        let e = PointEmitter::new(10.0, 1.0, FRAC_PI_4).unwrap();
        let y = render_point_emitter(&g, &e, true, 8).unwrap();
        let snr = snr_db(&y, &NoiseSpec::new(10.0, 0, 1).unwrap()).unwrap();
        assert_relative_eq!(snr, 4.590955874294666, max_relative = 1e-10);
    }
}
