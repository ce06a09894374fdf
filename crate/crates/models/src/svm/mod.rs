//! Support vector machines with a Gaussian (RBF) kernel.

mod ovo;
mod smo;

pub use ovo::{train_ovo, OvoSvm};
pub use smo::{dual_objective, rbf_gram, solve_smo, train_binary_svm, BinarySvm, SmoSolution, SmoStep};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvmError {
    #[error("training set needs both classes")]
    SingleClass,
    #[error("class {0} has fewer than 2 samples")]
    MissingClass(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("labels must be -1 or +1, found {0}")]
    InvalidLabel(f64),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Box constraint.
    pub c: f64,
    pub gamma: f64,
    /// KKT tolerance on `y·f(x)`.
    pub tol: f64,
    /// Step budget in units of the training-set size.
    pub max_passes: usize,
    /// Seeds the random second-choice fallback.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 100.0,
            gamma: 0.01,
            tol: 1e-3,
            max_passes: 2000,
            seed: 0,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvmError::InvalidParams(format!("C = {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SvmError::InvalidParams(format!("gamma = {}", self.gamma)));
        }
        if !(self.tol > 0.0) {
            return Err(SvmError::InvalidParams(format!("tol = {}", self.tol)));
        }
        Ok(())
    }
}

/// `exp(-gamma·‖x − z‖²)`.
pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != z.len() {
        return Err(SvmError::LengthMismatch(x.len(), z.len()));
    }
    Ok(rbf_unchecked(x, z, gamma))
}

#[inline]
pub(crate) fn rbf_unchecked(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}
