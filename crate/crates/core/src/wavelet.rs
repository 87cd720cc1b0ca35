//! Orthogonal Daubechies-4 (eight-tap) discrete wavelet transform with
//! periodic boundaries on power-of-two lengths.

use crate::error::{Error, Result};

/// Low-pass synthesis filter.
#[allow(clippy::excessive_precision)]
pub const DB4_LO: [f64; 8] = [
    0.230_377_813_308_896_500_863,
    0.714_846_570_552_915_647_090,
    0.630_880_767_929_858_907_882,
    -0.027_983_769_416_859_854_211,
    -0.187_034_811_719_093_084_080,
    0.030_841_381_835_560_763_627,
    0.032_883_011_666_885_199_735,
    -0.010_597_401_785_069_032_105,
];

fn db4_hi() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (n, v) in g.iter_mut().enumerate() {
        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
        *v = s * DB4_LO[7 - n];
    }
    g
}

/// Multi-level periodic db4 transform on length `len` (a power of two),
/// stopping once the approximation band would drop below `min_coarse`.
#[derive(Debug, Clone, PartialEq)]
pub struct Db4 {
    len: usize,
    levels: usize,
    hi: [f64; 8],
}

impl Db4 {
    pub fn new(len: usize) -> Result<Self> {
        Self::with_min_coarse(len, 4)
    }

    pub fn with_min_coarse(len: usize, min_coarse: usize) -> Result<Self> {
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::domain(format!("wavelet length {len} must be a power of two ≥ 2")));
        }
        let mut levels = 0;
        let mut n = len;
        while n / 2 >= min_coarse.max(1) && n >= 2 {
            n /= 2;
            levels += 1;
        }
        Ok(Self { len, levels, hi: db4_hi() })
    }

    /// Transform for signals of length `n` zero-padded to the next power of two.
    pub fn for_signal(n: usize) -> Result<Self> {
        Self::new(n.next_power_of_two().max(8))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Coefficients `[a_J, d_J, …, d_1]` of `x`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len, "wavelet input length");
        let mut out = x.to_vec();
        let mut n = self.len;
        let mut buf = vec![0.0; self.len];
        for _ in 0..self.levels {
            let half = n / 2;
            for k in 0..half {
                let (mut a, mut d) = (0.0, 0.0);
                for t in 0..8 {
                    let v = out[(2 * k + t) % n];
                    a += DB4_LO[t] * v;
                    d += self.hi[t] * v;
                }
                buf[k] = a;
                buf[half + k] = d;
            }
            out[..n].copy_from_slice(&buf[..n]);
            n = half;
        }
        out
    }

    /// Inverse (and adjoint) of [`forward`](Self::forward).
    pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.len, "wavelet input length");
        let mut out = c.to_vec();
        let mut n = self.len >> self.levels;
        let mut buf = vec![0.0; self.len];
        for _ in 0..self.levels {
            let full = 2 * n;
            buf[..full].iter_mut().for_each(|v| *v = 0.0);
            for k in 0..n {
                let (a, d) = (out[k], out[n + k]);
                for t in 0..8 {
                    buf[(2 * k + t) % full] += DB4_LO[t] * a + self.hi[t] * d;
                }
            }
            out[..full].copy_from_slice(&buf[..full]);
            n = full;
        }
        out
    }
}
