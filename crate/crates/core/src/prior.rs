//! Multivariate normal priors truncated to nonnegative parameters.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normal prior restricted to the nonnegative orthant.
///
/// The log-density is unnormalized: the truncation constant cancels in
/// Metropolis ratios and does not move the mean or MAP.
#[derive(Clone, Debug)]
pub struct TruncatedNormalPrior {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

/// Serialized form: mean vector and row-major covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
}

impl TruncatedNormalPrior {
    /// Fails when the covariance is not symmetric positive definite.
    pub fn new(mean: &[f64], covariance_row_major: &[f64]) -> Result<Self> {
        let n = mean.len();
        if n == 0 || covariance_row_major.len() != n * n {
            return Err(Error::Config(format!(
                "prior covariance must have {} entries for a {n}-dimensional mean",
                n * n
            )));
        }
        let cov = DMatrix::from_row_slice(n, n, covariance_row_major);
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax() {
            return Err(Error::Config("prior covariance is not symmetric".into()));
        }
        let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
            Error::Config("prior covariance is not positive definite".into())
        })?;
        Ok(TruncatedNormalPrior {
            mean: DVector::from_column_slice(mean),
            covariance: cov,
            chol,
        })
    }

    /// Independent components with the given means and standard deviations.
    pub fn diagonal(mean: &[f64], std: &[f64]) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::Config("mean and std lengths differ".into()));
        }
        let n = mean.len();
        let mut cov = vec![0.0; n * n];
        for (i, s) in std.iter().enumerate() {
            cov[i * n + i] = s * s;
        }
        Self::new(mean, &cov)
    }

    pub fn from_spec(spec: &PriorSpec) -> Result<Self> {
        Self::new(&spec.mean, &spec.covariance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn in_support(x: &[f64]) -> bool {
        x.iter().all(|&v| v >= 0.0)
    }

    /// `−½ (x − x̄)ᵀ Γ⁻¹ (x − x̄)` inside the support, `−∞` outside.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        if !Self::in_support(x) {
            return f64::NEG_INFINITY;
        }
        let d = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        // Γ = L Lᵀ, so dᵀΓ⁻¹d = |L⁻¹d|².
        let mut y = d;
        self.chol.l_dirty().solve_lower_triangular_mut(&mut y);
        -0.5 * y.norm_squared()
    }
}
