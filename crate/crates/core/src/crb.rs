//! Fisher information and Cramér–Rao bounds for localizing one or two hidden
//! point emitters from a single photograph under AWGN.
//!
//! Parameters are ordered `(c, ρ, φ)` per emitter. With the edge present the
//! angle derivative has two parts: the smooth change of `1/d²` over the lit
//! region and the motion of the shadow line `θ = φ`, which sweeps lit area out
//! of every pixel it crosses. The latter is a line integral along the ray.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FloorGrid;
use crate::par;
use crate::quadrature::{ray_rectangle, GaussLegendre};
use crate::simulate::{beyond, check_outside, clipped_rule, PointEmitter};

/// Default cap on the (Jacobi-scaled) condition number of `F`.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    Intensity,
    Range,
    Angle,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::Intensity, Param::Range, Param::Angle];

    pub fn name(self) -> &'static str {
        match self {
            Param::Intensity => "c",
            Param::Range => "rho",
            Param::Angle => "phi",
        }
    }
}

/// `∂i_m/∂(c_s, ρ_s, φ_s)` for one pixel patch `[x0, x1, y0, y1]`, as pixel means.
pub fn sensitivity_row(
    rect: [f64; 4],
    emitter: &PointEmitter,
    edge_present: bool,
    quad_order: usize,
) -> Result<[f64; 3]> {
    emitter.validate()?;
    if quad_order == 0 {
        return Err(Error::domain("quadrature order must be at least 1"));
    }
    let gl = GaussLegendre::new(quad_order);
    sensitivity_with(&gl, rect, emitter, edge_present)
}

fn sensitivity_with(gl: &GaussLegendre, rect: [f64; 4], e: &PointEmitter, edge: bool) -> Result<[f64; 3]> {
    let q = e.position();
    check_outside(rect, q)?;
    let (sin, cos) = e.phi_s.sin_cos();
    let area = (rect[1] - rect[0]) * (rect[3] - rect[2]);
    let keep: &[[f64; 2]] = if edge { &[beyond(e.phi_s)] } else { &[] };

    let (mut dc, mut drho, mut dphi) = (0.0, 0.0, 0.0);
    for (p, w) in clipped_rule(gl, rect, keep) {
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        let inv2 = 1.0 / (d2 * d2);
        // d² = |p + ρu|² with u = (cos φ, sin φ)
        let dd_drho = 2.0 * e.rho_s + 2.0 * (p[0] * cos + p[1] * sin);
        let dd_dphi = 2.0 * e.rho_s * (-p[0] * sin + p[1] * cos);
        dc += w / d2;
        drho -= w * e.c_s * dd_drho * inv2;
        dphi -= w * e.c_s * dd_dphi * inv2;
    }

    if edge {
        let [x0, x1, y0, y1] = rect;
        if let Some((t0, t1)) = ray_rectangle([cos, sin], x0, x1, y0, y1) {
            let line = gl.integrate(t0, t1, |t| {
                let d2 = (t * cos - q[0]).powi(2) + (t * sin - q[1]).powi(2);
                t / d2
            });
            dphi -= e.c_s * line;
        }
    }
    Ok([dc / area, drho / area, dphi / area])
}

/// `M × 3K` Jacobian of the pixel intensities with respect to every emitter's
/// `(c, ρ, φ)`.
pub fn jacobian(
    grid: &FloorGrid,
    emitters: &[PointEmitter],
    edge_present: bool,
    quad_order: usize,
) -> Result<DMatrix<f64>> {
    if emitters.is_empty() || emitters.len() > 2 {
        return Err(Error::domain("Fisher analysis supports one or two emitters"));
    }
    for e in emitters {
        e.validate()?;
    }
    if emitters.len() == 2 && emitters[0].rho_s == emitters[1].rho_s && emitters[0].phi_s == emitters[1].phi_s {
        return Err(Error::domain("emitters must be distinct"));
    }
    if quad_order == 0 {
        return Err(Error::domain("quadrature order must be at least 1"));
    }
    let gl = GaussLegendre::new(quad_order);
    let rows = par::try_map_range(grid.len(), |m| {
        let rect = grid.pixel_rect(m);
        let mut row = Vec::with_capacity(3 * emitters.len());
        for e in emitters {
            row.extend(sensitivity_with(&gl, rect, e, edge_present)?);
        }
        Ok::<_, Error>(row)
    })?;
    let k = 3 * emitters.len();
    Ok(DMatrix::from_row_iterator(grid.len(), k, rows.into_iter().flatten()))
}

/// `F = GᵀG / σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub entries: DMatrix<f64>,
    pub sigma2: f64,
    pub params: Vec<(usize, Param)>,
}

impl FisherMatrix {
    pub fn from_jacobian(g: &DMatrix<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::domain("noise variance must be positive"));
        }
        if !g.ncols().is_multiple_of(3) {
            return Err(Error::Dimension { expected: 3 * (g.ncols() / 3 + 1), got: g.ncols() });
        }
        let params = (0..g.ncols() / 3).flat_map(|t| Param::ALL.map(|p| (t, p))).collect();
        Ok(Self { entries: g.tr_mul(g) / sigma2, sigma2, params })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Keep only the listed parameter indices.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let n = keep.len();
        let entries = DMatrix::from_fn(n, n, |i, j| self.entries[(keep[i], keep[j])]);
        Self { entries, sigma2: self.sigma2, params: keep.iter().map(|&k| self.params[k]).collect() }
    }
}

pub fn fisher_matrix(
    grid: &FloorGrid,
    emitters: &[PointEmitter],
    edge_present: bool,
    sigma2: f64,
    quad_order: usize,
) -> Result<FisherMatrix> {
    FisherMatrix::from_jacobian(&jacobian(grid, emitters, edge_present, quad_order)?, sigma2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbResult {
    /// `[F⁻¹]_kk`, in the order of `params`.
    pub values: Vec<f64>,
    pub params: Vec<(usize, Param)>,
    /// Condition number of the Jacobi-scaled Fisher matrix.
    pub condition: f64,
    /// Set when `condition` exceeds the cap; values are then unreliable.
    pub ill_conditioned: bool,
    pub edge_present: bool,
    pub emitters: Vec<PointEmitter>,
}

impl CrbResult {
    pub fn get(&self, target: usize, p: Param) -> Option<f64> {
        self.params.iter().position(|&x| x == (target, p)).map(|k| self.values[k])
    }
}

/// Diagonal of `F⁻¹` through a symmetric eigendecomposition of the
/// Jacobi-scaled matrix `S F S`, `S = diag(F_kk^{-1/2})`.
pub fn crb(fim: &FisherMatrix) -> Result<CrbResult> {
    crb_with_cap(fim, DEFAULT_CONDITION_CAP)
}

pub fn crb_with_cap(fim: &FisherMatrix, cap: f64) -> Result<CrbResult> {
    let n = fim.dim();
    let f = &fim.entries;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("Fisher matrix has non-finite entries".into()));
    }
    let diag: Vec<f64> = (0..n).map(|k| f[(k, k)]).collect();
    if diag.iter().any(|&d| d <= 0.0) {
        let values = vec![f64::INFINITY; n];
        return Ok(CrbResult {
            values,
            params: fim.params.clone(),
            condition: f64::INFINITY,
            ill_conditioned: true,
            edge_present: false,
            emitters: Vec::new(),
        });
    }
    let s: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| 0.5 * (f[(i, j)] + f[(j, i)]) * s[i] * s[j]);
    let eig = SymmetricEigen::new(scaled);
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    let values = (0..n)
        .map(|k| {
            if lmin <= 0.0 {
                return f64::INFINITY;
            }
            let v: f64 = (0..n).map(|i| eig.eigenvectors[(k, i)].powi(2) / eig.eigenvalues[i]).sum();
            v * s[k] * s[k]
        })
        .collect();
    Ok(CrbResult {
        values,
        params: fim.params.clone(),
        condition,
        ill_conditioned: condition.is_nan() || condition > cap,
        edge_present: false,
        emitters: Vec::new(),
    })
}

/// Full-model bounds for one or two emitters.
pub fn crb_for(
    grid: &FloorGrid,
    emitters: &[PointEmitter],
    edge_present: bool,
    sigma2: f64,
    quad_order: usize,
) -> Result<CrbResult> {
    let fim = fisher_matrix(grid, emitters, edge_present, sigma2, quad_order)?;
    let mut r = crb(&fim)?;
    r.edge_present = edge_present;
    r.emitters = emitters.to_vec();
    Ok(r)
}

/// Bounds on `(c, ρ)` per emitter when every angle is known.
pub fn crb_known_angles(
    grid: &FloorGrid,
    emitters: &[PointEmitter],
    edge_present: bool,
    sigma2: f64,
    quad_order: usize,
) -> Result<CrbResult> {
    let fim = fisher_matrix(grid, emitters, edge_present, sigma2, quad_order)?;
    let keep: Vec<usize> = (0..fim.dim()).filter(|&k| fim.params[k].1 != Param::Angle).collect();
    let mut r = crb(&fim.restrict(&keep))?;
    r.edge_present = edge_present;
    r.emitters = emitters.to_vec();
    Ok(r)
}

/// Axis-aligned uncertainty ellipse in `(ρ, φ)` around an emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_rho: f64,
    pub semi_phi: f64,
}

pub const DEFAULT_K_SIGMA: f64 = 2.0;

/// Semi-axes `k·√CRB(ρ)` and `k·√CRB(φ)`; a known angle gives a zero φ axis.
pub fn uncertainty_ellipse(result: &CrbResult, target: usize, k_sigma: f64) -> Result<Ellipse> {
    let e = result
        .emitters
        .get(target)
        .ok_or_else(|| Error::domain(format!("no emitter {target} in result")))?;
    let rho = result.get(target, Param::Range).ok_or_else(|| Error::domain("range bound missing"))?;
    let phi = result.get(target, Param::Angle).unwrap_or(0.0);
    if !(rho.is_finite() && phi.is_finite()) {
        return Err(Error::domain("uncertainty ellipse needs finite bounds"));
    }
    Ok(Ellipse { center: [e.rho_s, e.phi_s], semi_rho: k_sigma * rho.sqrt(), semi_phi: k_sigma * phi.sqrt() })
}

/// One row of a single-emitter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub phi: f64,
    pub edge: [f64; 3],
    pub no_edge: [f64; 3],
    pub cond_edge: f64,
    pub cond_no_edge: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 12] = [
        "rho", "phi", "crb_eo_c", "crb_eo_rho", "crb_eo_phi", "crb_noeo_c", "crb_noeo_rho", "crb_noeo_phi",
        "ratio_rho", "ratio_phi", "cond_eo", "cond_noeo",
    ];

    /// `CRB_EO(ρ) / CRB_noEO(ρ)`.
    pub fn ratio_rho(&self) -> f64 {
        self.edge[1] / self.no_edge[1]
    }

    /// `CRB_EO(φ) / CRB_noEO(φ)`.
    pub fn ratio_phi(&self) -> f64 {
        self.edge[2] / self.no_edge[2]
    }

    pub fn fields(&self) -> [f64; 12] {
        [
            self.rho, self.phi, self.edge[0], self.edge[1], self.edge[2], self.no_edge[0], self.no_edge[1],
            self.no_edge[2], self.ratio_rho(), self.ratio_phi(), self.cond_edge, self.cond_no_edge,
        ]
    }
}

/// Edge and no-edge bounds for one emitter over every `(ρ, φ)` pair.
pub fn sweep_single(
    grid: &FloorGrid,
    c_s: f64,
    rhos: &[f64],
    phis: &[f64],
    sigma2: f64,
    quad_order: usize,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(rhos.len() * phis.len());
    for &rho in rhos {
        for &phi in phis {
            let e = [PointEmitter::new(c_s, rho, phi)?];
            let a = crb_for(grid, &e, true, sigma2, quad_order)?;
            let b = crb_for(grid, &e, false, sigma2, quad_order)?;
            rows.push(SweepRow {
                rho,
                phi,
                edge: [a.values[0], a.values[1], a.values[2]],
                no_edge: [b.values[0], b.values[1], b.values[2]],
                cond_edge: a.condition,
                cond_no_edge: b.condition,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    crate::io::write_table(w, &SweepRow::HEADER, rows.iter().map(|r| r.fields().to_vec()))
}

/// Equally spaced angles `k·π/(2·steps)` for `k = 1..steps−1`, i.e. the open
/// quarter plane on a `π/(2·steps)` lattice.
pub fn quarter_plane_angles(steps: usize) -> Vec<f64> {
    (1..steps).map(|k| k as f64 * FRAC_PI_2 / steps as f64).collect()
}
