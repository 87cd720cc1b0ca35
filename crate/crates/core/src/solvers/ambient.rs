use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Least-squares fit and orthogonal projection for the ambient basis `A`,
/// tolerant of an all-zero near-field column.
#[derive(Debug, Clone)]
pub struct AmbientProjector {
    basis: DMatrix<f64>,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    tol: f64,
    cols: usize,
}

impl AmbientProjector {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::domain("ambient basis is empty"));
        }
        let svd = SVD::new(a.clone(), true, true);
        let smax = svd.singular_values.max();
        let tol = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
        let u = svd.u.as_ref().expect("left singular vectors");
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > tol).collect();
        let basis = DMatrix::from_fn(a.nrows(), keep.len(), |i, j| u[(i, keep[j])]);
        Ok(Self { basis, svd, tol, cols: a.ncols() })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `v − QQᵀv`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.basis * self.basis.tr_mul(v)
    }

    /// Column-wise projection of a matrix.
    pub fn project_columns(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        k - &self.basis * self.basis.tr_mul(k)
    }

    /// Minimum-norm `argmin_c ‖r − Ac‖`.
    pub fn coefficients(&self, r: &DVector<f64>) -> DVector<f64> {
        self.svd.solve(r, self.tol).unwrap_or_else(|_| DVector::zeros(self.cols))
    }
}
