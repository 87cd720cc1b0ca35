//! Linear polar-pixel inversion: every hidden `(ρ_ℓ, α_n)` cell is an atom of
//! the dictionary and the scene is recovered by sparse regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ambient::AmbientProjector;
use super::fista::{mfista, Quadratic, SolveOptions};
use super::prox::{Regularizer, SparseGroup, L1};
use crate::error::{Error, Result};

/// Group-lasso weights: `group` multiplies `Σ_ℓ ‖s_ℓ‖₂` over per-range blocks
/// of `group_len` atoms and `l1` multiplies `‖s‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupWeights {
    pub group: f64,
    pub l1: f64,
    pub group_len: usize,
}

#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub dictionary: DMatrix<f64>,
    pub ambient: DMatrix<f64>,
    pub y: DVector<f64>,
    pub lambda: f64,
    pub nonneg: bool,
    pub groups: Option<GroupWeights>,
}

impl LinearProblem {
    pub fn new(dictionary: DMatrix<f64>, ambient: DMatrix<f64>, y: DVector<f64>, lambda: f64) -> Result<Self> {
        let p = Self { dictionary, ambient, y, lambda, nonneg: true, groups: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.y.len();
        if self.dictionary.nrows() != m {
            return Err(Error::Dimension { expected: m, got: self.dictionary.nrows() });
        }
        if self.ambient.nrows() != m {
            return Err(Error::Dimension { expected: m, got: self.ambient.nrows() });
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::domain("lambda must be finite and nonnegative"));
        }
        if let Some(g) = self.groups {
            if !(g.group >= 0.0 && g.l1 >= 0.0) {
                return Err(Error::domain("group weights must be nonnegative"));
            }
            if g.group_len == 0 || !self.dictionary.ncols().is_multiple_of(g.group_len) {
                return Err(Error::domain("group length must divide the dictionary width"));
            }
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("measurement contains non-finite values"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub s: DVector<f64>,
    pub c: DVector<f64>,
    pub trace: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `scale · ‖K⊥ᵀ y⊥‖_∞`, the smallest ℓ1 weight that zeroes the solution,
/// times `scale`.
pub fn default_lambda(dictionary: &DMatrix<f64>, ambient: &DMatrix<f64>, y: &DVector<f64>, scale: f64) -> Result<f64> {
    let proj = AmbientProjector::new(ambient)?;
    let g = proj.project_columns(dictionary).tr_mul(&proj.project(y));
    Ok(scale * g.amax())
}

fn solve(p: &LinearProblem, g: &dyn Regularizer, opts: SolveOptions) -> Result<LinearSolution> {
    p.validate()?;
    let proj = AmbientProjector::new(&p.ambient)?;
    let q = Quadratic::new(&p.dictionary, &proj, &p.y, None);
    let out = mfista(&q, g, DVector::zeros(p.dictionary.ncols()), opts);
    let c = proj.coefficients(&(&p.y - &p.dictionary * &out.x));
    Ok(LinearSolution {
        s: out.x,
        c,
        trace: out.trace,
        residual: out.residual,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// `min ½‖y − Ac − D̄s‖² + λ‖s‖₁ (+ ι{s ≥ 0})`.
pub fn fista_l1(p: &LinearProblem, opts: SolveOptions) -> Result<LinearSolution> {
    solve(p, &L1 { lambda: p.lambda, nonneg: p.nonneg }, opts)
}

/// `min ½‖y − Ac − D̄s‖² + λ_g Σ_ℓ ‖s_ℓ‖₂ + λ_1 ‖s‖₁ (+ ι{s ≥ 0})`.
pub fn sparse_group_lasso(p: &LinearProblem, opts: SolveOptions) -> Result<LinearSolution> {
    let g = p.groups.ok_or_else(|| Error::domain("sparse group lasso needs group weights"))?;
    solve(p, &SparseGroup { group: g.group, l1: g.l1, group_len: g.group_len, nonneg: p.nonneg }, opts)
}
