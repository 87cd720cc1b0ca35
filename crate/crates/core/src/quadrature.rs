//! Gauss–Legendre rules on intervals, rectangles, triangles and convex
//! polygons, plus half-plane clipping for pixels cut by a shadow line.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule with `order` points, exact for polynomials of degree `2·order − 1`.
    ///
    /// Panics if `order == 0`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be at least 1");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// `∫_a^b f(x) dx`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.interval(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Tensor-product points over the axis-aligned rectangle `[x0,x1]×[y0,y1]`.
    pub fn rectangle(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<([f64; 2], f64)> {
        let xs: Vec<_> = self.interval(x0, x1).collect();
        let ys: Vec<_> = self.interval(y0, y1).collect();
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &(x, wx) in &xs {
            for &(y, wy) in &ys {
                out.push(([x, y], wx * wy));
            }
        }
        out
    }

    /// Collapsed (Duffy) tensor rule on the triangle `(p0, p1, p2)`.
    pub fn triangle(&self, p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> Vec<([f64; 2], f64)> {
        let e1 = [p1[0] - p0[0], p1[1] - p0[1]];
        let e2 = [p2[0] - p1[0], p2[1] - p1[1]];
        let area2 = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        let mut out = Vec::with_capacity(self.order() * self.order());
        for (a, wa) in self.interval(0.0, 1.0) {
            for (b, wb) in self.interval(0.0, 1.0) {
                let p = [
                    p0[0] + a * e1[0] + a * b * e2[0],
                    p0[1] + a * e1[1] + a * b * e2[1],
                ];
                out.push((p, wa * wb * a * area2));
            }
        }
        out
    }

    /// Fan-triangulated rule over a convex polygon (vertices in order).
    pub fn convex_polygon(&self, poly: &[[f64; 2]]) -> Vec<([f64; 2], f64)> {
        let mut out = Vec::new();
        if poly.len() < 3 {
            return out;
        }
        for k in 1..poly.len() - 1 {
            out.extend(self.triangle(poly[0], poly[k], poly[k + 1]));
        }
        out
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sutherland–Hodgman clip of a polygon to the half-plane `normal·p ≥ 0`.
pub fn clip_half_plane(poly: &[[f64; 2]], normal: [f64; 2]) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| normal[0] * p[0] + normal[1] * p[1];
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let fa = side(&a);
        let fb = side(&b);
        if fa >= 0.0 {
            out.push(a);
        }
        if (fa >= 0.0) != (fb >= 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Parameter interval `[t0, t1]` (with `t ≥ 0`) over which the ray `t·dir`
/// stays inside the rectangle, or `None` if it misses.
pub fn ray_rectangle(dir: [f64; 2], x0: f64, x1: f64, y0: f64, y1: f64) -> Option<(f64, f64)> {
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for (d, a, b) in [(dir[0], x0, x1), (dir[1], y0, y1)] {
        if d.abs() < 1e-300 {
            if a > 0.0 || b < 0.0 {
                return None;
            }
        } else {
            let (t1, t2) = (a / d, b / d);
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
    }
    (hi > lo).then_some((lo, hi))
}
