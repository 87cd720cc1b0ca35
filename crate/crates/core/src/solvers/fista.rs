use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ambient::AmbientProjector;
use super::prox::Regularizer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Relative proximal-gradient fixed-point residual.
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iter: 5000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x: DVector<f64>,
    /// Objective after every iteration, starting with the initial point.
    pub trace: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `½ sᵀHs − bᵀs + k` with `H = K⊥ᵀK⊥ + 2Q`, `b = K⊥ᵀy⊥`, `k = ½‖y⊥‖²`.
#[derive(Debug, Clone)]
pub(crate) struct Quadratic {
    pub h: DMatrix<f64>,
    pub b: DVector<f64>,
    pub k: f64,
}

impl Quadratic {
    /// Data term `½‖P⊥(y − Ks)‖²` plus an optional `sᵀQs`.
    pub fn new(k: &DMatrix<f64>, proj: &AmbientProjector, y: &DVector<f64>, extra: Option<&DMatrix<f64>>) -> Self {
        let kp = proj.project_columns(k);
        let yp = proj.project(y);
        let mut h = kp.tr_mul(&kp);
        if let Some(q) = extra {
            h += q * 2.0;
        }
        let b = kp.tr_mul(&yp);
        Self { h, b, k: 0.5 * yp.norm_squared() }
    }

    pub fn value(&self, s: &DVector<f64>) -> f64 {
        (0.5 * s.dot(&(&self.h * s)) - self.b.dot(s) + self.k).max(0.0)
    }

    pub fn grad(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.h * s - &self.b
    }

    /// Largest eigenvalue of `H` by power iteration.
    pub fn lipschitz(&self) -> f64 {
        let n = self.h.nrows();
        if n == 0 {
            return 0.0;
        }
        let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7919) % 13) as f64);
        v /= v.norm();
        let mut lam = 0.0;
        for _ in 0..500 {
            let w = &self.h * &v;
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            let next = v.dot(&w);
            v = w / norm;
            if (next - lam).abs() <= 1e-10 * next.abs() {
                lam = next;
                break;
            }
            lam = next;
        }
        lam.max(self.h.diagonal().max())
    }
}

fn fixed_point_residual(q: &Quadratic, g: &dyn Regularizer, x: &DVector<f64>, step: f64) -> f64 {
    let t = g.prox(&(x - q.grad(x) * step), step);
    let denom = x.norm().max(t.norm());
    if denom == 0.0 {
        0.0
    } else {
        (x - &t).norm() / denom
    }
}

/// Monotone FISTA with gradient-based restarts. A trial point is accepted
/// only if it does not raise the objective beyond rounding of the Gram form,
/// so the trace is non-increasing to within ~1e-13 relative.
pub(crate) fn mfista(q: &Quadratic, g: &dyn Regularizer, x0: DVector<f64>, opts: SolveOptions) -> SolveOutcome {
    let lip = q.lipschitz() * 1.02;
    let step = if lip > 0.0 { 1.0 / lip } else { 1e12 };
    let objective = |x: &DVector<f64>| q.value(x) + g.value(x);
    let slack = 1e-13 * q.k.max(f64::MIN_POSITIVE);

    let mut x = x0;
    let mut fx = objective(&x);
    let mut trace = vec![fx];
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    for k in 1..=opts.max_iter {
        iterations = k;
        let z = g.prox(&(&y - q.grad(&y) * step), step);
        let fz = objective(&z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let x_prev = x.clone();
        let accepted = fz <= fx + slack;
        if accepted {
            x = z.clone();
            fx = fz;
        }
        // restart when the momentum direction opposes the prox-gradient step
        if !accepted || (&y - &z).dot(&(&z - &x_prev)) > 0.0 {
            t = 1.0;
            y = x.clone();
        } else {
            y = &x + (&z - &x) * (t / t_next) + (&x - &x_prev) * ((t - 1.0) / t_next);
            t = t_next;
        }
        trace.push(fx);
        if k % 5 == 0 || k == opts.max_iter {
            residual = fixed_point_residual(q, g, &x, step);
            if residual < opts.tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        residual = fixed_point_residual(q, g, &x, step);
        converged = residual < opts.tol;
    }
    SolveOutcome { x, trace, residual, iterations, converged }
}
