//! Floor/hidden coordinate systems, the corner distance mapping and the
//! wall visibility test.
//!
//! The hidden half-space is parameterized by `α ∈ (0, π]` measured from the
//! wall; the reconstructed region uses `(0, π/2]`, matching a camera field of
//! view that sits in the first quadrant next to the corner.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// A point on the visible floor in polar coordinates about the corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorPoint {
    /// Range from the corner, meters.
    pub r: f64,
    /// Angle from the occluding wall, radians.
    pub theta: f64,
}

impl FloorPoint {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        ensure_finite("r", r)?;
        ensure_finite("theta", theta)?;
        if r <= 0.0 {
            return Err(Error::domain(format!("floor range must be positive, got {r}")));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::domain(format!("floor angle {theta} outside [0, π]")));
        }
        Ok(Self { r, theta })
    }

    pub fn from_cartesian(x: f64, y: f64) -> Result<Self> {
        Self::new(x.hypot(y), y.atan2(x))
    }

    pub fn to_cartesian(self) -> [f64; 2] {
        [self.r * self.theta.cos(), self.r * self.theta.sin()]
    }
}

/// A point of the hidden scene in cylindrical coordinates about the edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenPoint {
    pub rho: f64,
    pub alpha: f64,
    /// Height above the floor, meters.
    pub z: f64,
}

impl HiddenPoint {
    pub fn new(rho: f64, alpha: f64, z: f64) -> Result<Self> {
        ensure_finite("rho", rho)?;
        ensure_finite("alpha", alpha)?;
        ensure_finite("z", z)?;
        if rho < 0.0 {
            return Err(Error::domain(format!("hidden range must be nonnegative, got {rho}")));
        }
        if !(0.0..=PI).contains(&alpha) {
            return Err(Error::domain(format!("hidden angle {alpha} outside [0, π]")));
        }
        if z < 0.0 {
            return Err(Error::domain(format!("height must be nonnegative, got {z}")));
        }
        Ok(Self { rho, alpha, z })
    }

    /// Floor-plane position `−ρ(cos α, sin α)`.
    pub fn to_cartesian(self) -> [f64; 2] {
        hidden_xy(self.rho, self.alpha)
    }
}

#[inline]
pub(crate) fn hidden_xy(rho: f64, alpha: f64) -> [f64; 2] {
    [-rho * alpha.cos(), -rho * alpha.sin()]
}

/// Squared floor-plane distance between `p` and the hidden floor point
/// `(ρ, α, 0)`: `r² + ρ² − 2rρ·cos(π − θ + α)`.
pub fn distance_squared(p: FloorPoint, rho: f64, alpha: f64) -> Result<f64> {
    ensure_finite("r", p.r)?;
    ensure_finite("theta", p.theta)?;
    ensure_finite("rho", rho)?;
    ensure_finite("alpha", alpha)?;
    if p.r <= 0.0 || rho < 0.0 {
        return Err(Error::domain(format!("need r > 0 and ρ ≥ 0 (r={}, ρ={rho})", p.r)));
    }
    Ok(dist2_unchecked(p.r, p.theta, rho, alpha))
}

#[inline]
pub(crate) fn dist2_unchecked(r: f64, theta: f64, rho: f64, alpha: f64) -> f64 {
    // cos(π − θ + α) = −cos(α − θ)
    (r * r + rho * rho + 2.0 * r * rho * (alpha - theta).cos()).max(0.0)
}

/// Whether light from hidden angle `alpha` reaches `p` past the wall,
/// i.e. `H(θ − α)` with `H(0) = 1`.
pub fn visibility(p: FloorPoint, alpha: f64) -> bool {
    p.theta >= alpha
}

/// Parameters of a rectangular camera footprint on the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Physical side lengths `[x, y]`, meters.
    pub fov: [f64; 2],
    /// Lower-left corner of the footprint relative to the wall corner.
    #[serde(default)]
    pub origin_offset: [f64; 2],
}

/// Discretized camera field of view: `nx × ny` square-ish floor patches with
/// pixel `m = iy·nx + ix` centered at
/// `offset + ((ix + ½)·fov_x/nx, (iy + ½)·fov_y/ny)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct FloorGrid {
    spec: GridSpec,
    centers: Vec<FloorPoint>,
}

impl FloorGrid {
    pub fn new(nx: usize, ny: usize, fov: [f64; 2], origin_offset: [f64; 2]) -> Result<Self> {
        Self::from_spec(GridSpec { nx, ny, fov, origin_offset })
    }

    /// Square footprint of side `fov` touching the corner.
    pub fn square(n: usize, fov: f64) -> Result<Self> {
        Self::new(n, n, [fov, fov], [0.0, 0.0])
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        if spec.nx == 0 || spec.ny == 0 {
            return Err(Error::domain("grid needs at least one pixel per axis"));
        }
        for v in spec.fov.iter().chain(&spec.origin_offset) {
            ensure_finite("grid extent", *v)?;
        }
        if spec.fov[0] <= 0.0 || spec.fov[1] <= 0.0 {
            return Err(Error::domain("field of view must have positive extent"));
        }
        if spec.origin_offset[0] < 0.0 || spec.origin_offset[1] < 0.0 {
            return Err(Error::domain(
                "grid must lie in the visible quadrant (nonnegative origin offset)",
            ));
        }
        let (hx, hy) = (spec.fov[0] / spec.nx as f64, spec.fov[1] / spec.ny as f64);
        let mut centers = Vec::with_capacity(spec.nx * spec.ny);
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                let x = spec.origin_offset[0] + (ix as f64 + 0.5) * hx;
                let y = spec.origin_offset[1] + (iy as f64 + 0.5) * hy;
                centers.push(FloorPoint::from_cartesian(x, y)?);
            }
        }
        Ok(Self { spec, centers })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn nx(&self) -> usize {
        self.spec.nx
    }

    pub fn ny(&self) -> usize {
        self.spec.ny
    }

    /// Number of pixels `M`.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn pixel_centers(&self) -> &[FloorPoint] {
        &self.centers
    }

    /// Floor area of one pixel patch.
    pub fn pixel_area(&self) -> f64 {
        self.pixel_size()[0] * self.pixel_size()[1]
    }

    pub fn pixel_size(&self) -> [f64; 2] {
        [self.spec.fov[0] / self.spec.nx as f64, self.spec.fov[1] / self.spec.ny as f64]
    }

    /// `(x0, x1, y0, y1)` bounds of pixel `m`.
    pub fn pixel_rect(&self, m: usize) -> [f64; 4] {
        let (ix, iy) = (m % self.spec.nx, m / self.spec.nx);
        let [hx, hy] = self.pixel_size();
        let x0 = self.spec.origin_offset[0] + ix as f64 * hx;
        let y0 = self.spec.origin_offset[1] + iy as f64 * hy;
        [x0, x0 + hx, y0, y0 + hy]
    }

    /// Smallest and largest pixel-center angle.
    pub fn theta_range(&self) -> (f64, f64) {
        self.centers.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.theta), hi.max(p.theta))
        })
    }
}

impl TryFrom<GridSpec> for FloorGrid {
    type Error = Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        Self::from_spec(spec)
    }
}

impl From<FloorGrid> for GridSpec {
    fn from(g: FloorGrid) -> Self {
        g.spec
    }
}

/// `M × N` binary matrix with entry `(m, n) = visibility(pixel m, angles[n])`.
pub fn build_visibility_matrix(grid: &FloorGrid, angles: &[f64]) -> Result<DMatrix<f64>> {
    if angles.is_empty() {
        return Err(Error::domain("visibility matrix needs at least one angle"));
    }
    if angles.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("angles must be strictly increasing"));
    }
    let centers = grid.pixel_centers();
    Ok(DMatrix::from_fn(centers.len(), angles.len(), |m, n| {
        if visibility(centers[m], angles[n]) {
            1.0
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

    fn cartesian_oracle(r: f64, theta: f64, rho: f64, alpha: f64) -> f64 {
        let p = [r * theta.cos(), r * theta.sin()];
        let q = [-rho * alpha.cos(), -rho * alpha.sin()];
        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
    }

    #[test]
    fn collinear_and_right_angle_cases() {
        // π − θ + α = π
        let p = FloorPoint::new(1.0, 0.7).unwrap();
        assert_relative_eq!(distance_squared(p, 1.0, 0.7).unwrap(), 4.0, epsilon = 1e-14);
        // π − θ + α = π/2
        let p = FloorPoint::new(1.0, 1.2).unwrap();
        assert_relative_eq!(distance_squared(p, 1.0, 1.2 - FRAC_PI_2).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn matches_cartesian_embedding() {
        let p = FloorPoint::new(0.1, 0.8).unwrap();
        let d2 = distance_squared(p, 0.18, FRAC_PI_4).unwrap();
        assert_relative_eq!(d2, cartesian_oracle(0.1, 0.8, 0.18, FRAC_PI_4), max_relative = 1e-13);
    }

    #[test]
    fn rejects_non_finite_and_bad_ranges() {
        let p = FloorPoint { r: 1.0, theta: 0.3 };
        assert!(distance_squared(p, f64::NAN, 0.1).is_err());
        assert!(distance_squared(p, 1.0, f64::INFINITY).is_err());
        assert!(distance_squared(p, -1.0, 0.1).is_err());
        assert!(FloorPoint::new(0.0, 0.3).is_err());
    }

    #[test]
    fn visibility_step() {
        let p = |t| FloorPoint::new(1.0, t).unwrap();
        assert!(visibility(p(0.9), 0.3));
        assert!(!visibility(p(0.3), 0.9));
        assert!(visibility(p(0.5), 0.5));
    }

    #[test]
    fn visibility_matrix_small_cases() {
        // single pixel on the diagonal
        let g = FloorGrid::new(1, 1, [0.2, 0.2], [0.0, 0.0]).unwrap();
        let v = build_visibility_matrix(&g, &[FRAC_PI_8, FRAC_PI_2]).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0]);

        let g = FloorGrid::square(5, 0.2).unwrap();
        let (lo, _) = g.theta_range();
        let v = build_visibility_matrix(&g, &[lo * 0.2, lo * 0.5, lo * 0.9]).unwrap();
        assert!(v.iter().all(|&x| x == 1.0));

        assert!(build_visibility_matrix(&g, &[]).is_err());
        assert!(build_visibility_matrix(&g, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn visibility_rows_never_switch_back_on() {
        let g = FloorGrid::square(155, 0.2).unwrap();
        let angles: Vec<f64> = (0..90).map(|n| (n as f64 + 0.5) * FRAC_PI_2 / 90.0).collect();
        let v = build_visibility_matrix(&g, &angles).unwrap();
        for m in 0..v.nrows() {
            for n in 1..v.ncols() {
                assert!(v[(m, n)] <= v[(m, n - 1)], "row {m} turns back on at {n}");
            }
        }
    }

    #[test]
    fn grid_area_and_layout() {
        let g = FloorGrid::new(4, 2, [0.2, 0.1], [0.01, 0.02]).unwrap();
        assert_eq!(g.len(), 8);
        assert_relative_eq!(g.pixel_area(), 0.05 * 0.05);
        let [x0, x1, y0, y1] = g.pixel_rect(5);
        assert_relative_eq!(x0, 0.06);
        assert_relative_eq!(x1, 0.11);
        assert_relative_eq!(y0, 0.07);
        assert_relative_eq!(y1, 0.12);
        let c = g.pixel_centers()[5].to_cartesian();
        assert_relative_eq!(c[0], 0.085, epsilon = 1e-15);
        assert_relative_eq!(c[1], 0.095, epsilon = 1e-15);
        assert!(FloorGrid::new(2, 2, [0.1, 0.1], [-0.05, 0.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn law_of_cosines_bounds_and_cartesian_agreement(
            r in 1e-3f64..5.0, theta in 0.0f64..PI, rho in 0.0f64..5.0, alpha in 0.0f64..PI,
        ) {
            let d2 = distance_squared(FloorPoint { r, theta }, rho, alpha).unwrap();
            let scale = (r + rho).powi(2);
            prop_assert!(d2 >= (r - rho).powi(2) - 1e-12 * scale);
            prop_assert!(d2 <= scale * (1.0 + 1e-12));
            let oracle = cartesian_oracle(r, theta, rho, alpha);
            prop_assert!((d2 - oracle).abs() <= 1e-12 * oracle.max(1e-300) + 1e-15 * scale,
                "d2={d2} oracle={oracle}");
        }
    }
}
