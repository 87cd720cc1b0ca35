//! Nonsmooth terms and their proximal maps.

use std::sync::Mutex;

use nalgebra::DVector;

use crate::wavelet::Db4;

/// A closed convex penalty `g` with computable `prox_{t·g}`.
pub trait Regularizer: Sync {
    /// `g(x)` for feasible `x`.
    fn value(&self, x: &DVector<f64>) -> f64;
    /// `argmin_u g(u) + ‖u − v‖² / (2t)`.
    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64>;
}

#[inline]
fn shrink(v: f64, t: f64, nonneg: bool) -> f64 {
    if nonneg {
        (v - t).max(0.0)
    } else {
        v.signum() * (v.abs() - t).max(0.0)
    }
}

/// `λ‖x‖₁`, optionally restricted to `x ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct L1 {
    pub lambda: f64,
    pub nonneg: bool,
}

impl Regularizer for L1 {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        v.map(|x| shrink(x, self.lambda * step, self.nonneg))
    }
}

/// `λ_g Σ_l ‖x_l‖₂ + λ_1 ‖x‖₁` over consecutive blocks of `group_len`,
/// optionally with `x ≥ 0`. The prox is the ℓ1 shrinkage followed by the
/// block shrinkage.
#[derive(Debug, Clone, Copy)]
pub struct SparseGroup {
    pub group: f64,
    pub l1: f64,
    pub group_len: usize,
    pub nonneg: bool,
}

impl Regularizer for SparseGroup {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let groups: f64 = x.as_slice().chunks(self.group_len).map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
        self.group * groups + self.l1 * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        let mut u = v.map(|x| shrink(x, self.l1 * step, self.nonneg));
        let t = self.group * step;
        for g in u.as_mut_slice().chunks_mut(self.group_len) {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = if norm > t { 1.0 - t / norm } else { 0.0 };
            g.iter_mut().for_each(|v| *v *= scale);
        }
        u
    }
}

/// `λ‖W·pad(s)‖₁ + ι{s ≥ 0}` with `W` an orthogonal db4 transform on the
/// zero-padded signal.
///
/// The prox has no closed form once the sign constraint and the padding are
/// involved, so it is computed by accelerated projected gradient on the dual
/// (wavelet coefficients boxed to `[−λt, λt]`). The primal point is always
/// the projection onto the feasible set, so the output is exactly feasible,
/// and the duality gap bounds its distance to the true prox. The last dual
/// iterate is kept to warm-start the next call, which is what makes the prox
/// cheap inside an outer proximal-gradient loop.
#[derive(Debug)]
pub struct WaveletL1 {
    pub lambda: f64,
    pub nonneg: bool,
    n: usize,
    w: Db4,
    pub max_inner: usize,
    /// Stop once `‖x − prox‖ ≤ inner_tol·‖v‖` is certified by the gap.
    pub inner_tol: f64,
    warm: Mutex<Option<(f64, Vec<f64>)>>,
}

impl Clone for WaveletL1 {
    fn clone(&self) -> Self {
        Self { warm: Mutex::new(None), w: self.w.clone(), ..*self }
    }
}

impl WaveletL1 {
    pub fn new(n: usize, lambda: f64, nonneg: bool) -> Self {
        let w = Db4::for_signal(n).expect("positive signal length");
        Self { lambda, nonneg, n, w, max_inner: 1_000, inner_tol: 1e-6, warm: Mutex::new(None) }
    }

    fn pad(&self, s: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.w.len()];
        p[..self.n].copy_from_slice(s);
        p
    }

    /// `W·pad(s)`.
    pub fn coefficients(&self, s: &DVector<f64>) -> Vec<f64> {
        self.w.forward(&self.pad(s.as_slice()))
    }

    /// `(W·pad)ᵀ c`, truncated to the signal length.
    pub fn adjoint(&self, c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&self.w.inverse(c)[..self.n])
    }

    fn project(&self, x: &mut [f64]) {
        x[self.n..].iter_mut().for_each(|v| *v = 0.0);
        if self.nonneg {
            x[..self.n].iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }

    /// Primal point for dual `u`: `P_C(v − Wᵀu)`.
    fn primal(&self, v: &[f64], u: &[f64]) -> Vec<f64> {
        let wu = self.w.inverse(u);
        let mut x: Vec<f64> = v.iter().zip(&wu).map(|(a, b)| a - b).collect();
        self.project(&mut x);
        x
    }
}

impl Regularizer for WaveletL1 {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.lambda * self.coefficients(x).iter().map(|v| v.abs()).sum::<f64>()
    }

    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        let t = self.lambda * step;
        let vp = self.pad(v.as_slice());
        if t == 0.0 {
            let mut x = vp;
            self.project(&mut x);
            return DVector::from_column_slice(&x[..self.n]);
        }
        let len = vp.len();
        let clip = |u: &mut [f64]| u.iter_mut().for_each(|c| *c = c.clamp(-t, t));
        let mut u = match self.warm.lock().ok().and_then(|g| g.clone()) {
            Some((t_old, u_old)) if u_old.len() == len => u_old.iter().map(|c| c * t / t_old).collect(),
            _ => vec![0.0; len],
        };
        clip(&mut u);
        // ½‖x − x*‖² ≤ gap, so this bounds the primal error by inner_tol·‖v‖
        // (the gap cannot be resolved much below rounding of ‖v‖²)
        let target = 0.5 * (self.inner_tol * v.norm()).powi(2).max(1e-15 * v.norm_squared());
        let mut z = u.clone();
        let mut k = 1.0_f64;
        for it in 0..self.max_inner {
            if it % 10 == 0 {
                let x = self.primal(&vp, &u);
                let wx = self.w.forward(&x);
                let gap: f64 = wx.iter().zip(&u).map(|(a, b)| t * a.abs() - a * b).sum();
                if gap <= target {
                    break;
                }
            }
            let xz = self.primal(&vp, &z);
            let mut un: Vec<f64> = z.iter().zip(self.w.forward(&xz)).map(|(a, b)| a + b).collect();
            clip(&mut un);
            let kn = 0.5 * (1.0 + (1.0 + 4.0 * k * k).sqrt());
            let beta = (k - 1.0) / kn;
            for i in 0..len {
                z[i] = un[i] + beta * (un[i] - u[i]);
            }
            u = un;
            k = kn;
        }
        let x = self.primal(&vp, &u);
        if let Ok(mut g) = self.warm.lock() {
            *g = Some((t, u));
        }
        DVector::from_column_slice(&x[..self.n])
    }
}

/// Plain nonnegativity constraint.
#[derive(Debug, Clone, Copy)]
pub struct Nonneg;

impl Regularizer for Nonneg {
    fn value(&self, _: &DVector<f64>) -> f64 {
        0.0
    }

    fn prox(&self, v: &DVector<f64>, _: f64) -> DVector<f64> {
        v.map(|x| x.max(0.0))
    }
}
