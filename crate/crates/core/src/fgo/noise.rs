use nalgebra::{DMatrix, DVector};

use crate::error::{JpcmError, Result};

/// Gaussian noise stored as a square-root information matrix `S` with
/// `S^T S = Σ^{-1}`; `whiten(e) = S e`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Diagonal `S`, stored as `1/sigma`.
    Diagonal(DVector<f64>),
    /// Upper-triangular `S`.
    Full(DMatrix<f64>),
}

impl NoiseModel {
    pub fn from_sigmas(sigmas: &[f64]) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(JpcmError::Dimension("noise model needs at least one sigma".into()));
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(JpcmError::NotPositiveDefinite(format!("sigma {s}")));
        }
        Ok(NoiseModel::Diagonal(DVector::from_iterator(
            sigmas.len(),
            sigmas.iter().map(|s| 1.0 / s),
        )))
    }

    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        Self::from_sigmas(&vec![sigma; dim])
    }

    /// Converts a covariance once; diagonal covariances keep the cheap form.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || cov.nrows() == 0 {
            return Err(JpcmError::Dimension(format!(
                "covariance must be square and non-empty, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let n = cov.nrows();
        let off_diagonal = (0..n).any(|i| (0..n).any(|j| i != j && cov[(i, j)] != 0.0));
        if !off_diagonal {
            let sigmas: Vec<f64> = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
            return Self::from_sigmas(&sigmas);
        }
        let info = cov
            .clone()
            .cholesky()
            .ok_or_else(|| JpcmError::NotPositiveDefinite("covariance".into()))?
            .inverse();
        let l = info
            .cholesky()
            .ok_or_else(|| JpcmError::NotPositiveDefinite("information".into()))?
            .unpack();
        Ok(NoiseModel::Full(l.transpose()))
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseModel::Diagonal(d) => d.len(),
            NoiseModel::Full(s) => s.nrows(),
        }
    }

    pub fn whiten(&self, e: &DVector<f64>) -> DVector<f64> {
        match self {
            NoiseModel::Diagonal(d) => e.component_mul(d),
            NoiseModel::Full(s) => s * e,
        }
    }

    /// Row-scales a Jacobian block in place.
    pub fn whiten_jacobian(&self, j: &mut DMatrix<f64>) {
        match self {
            NoiseModel::Diagonal(d) => {
                for (mut row, w) in j.row_iter_mut().zip(d.iter()) {
                    row *= *w;
                }
            }
            NoiseModel::Full(s) => *j = s * &*j,
        }
    }

    /// `e^T Σ^{-1} e`.
    pub fn squared_mahalanobis(&self, e: &DVector<f64>) -> f64 {
        self.whiten(e).norm_squared()
    }

    pub fn sqrt_information(&self) -> DMatrix<f64> {
        match self {
            NoiseModel::Diagonal(d) => DMatrix::from_diagonal(d),
            NoiseModel::Full(s) => s.clone(),
        }
    }
}
