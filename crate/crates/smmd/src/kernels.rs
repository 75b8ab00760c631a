//! Kernel evaluations and pairwise squared distances shared by all estimators.
//!
//! Two kernel families are supported: the Gaussian RBF
//! k(x,y) = exp(-‖x-y‖²/(2γ²)) and the inverse multi-quadratics (IMQ)
//! k(x,y) = 1/(1 + ‖x-y‖²/(2γ²)). The width γ is often expressed through the
//! scale s = γ²/d, where s = 1 recovers the rule-of-thumb width γ² = d.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Rbf,
    Imq,
}

impl KernelFamily {
    pub fn label(&self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Imq => "imq",
        }
    }
}

/// A kernel family together with its width γ > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    gamma: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidGamma(gamma));
        }
        Ok(Self { family, gamma })
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Rbf, gamma)
    }

    pub fn imq(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Imq, gamma)
    }

    /// Builds the kernel from a scale s = γ²/d, i.e. γ = √(s·d).
    pub fn from_scale(family: KernelFamily, scale: f64, d: usize) -> Result<Self> {
        Self::new(family, scale_to_gamma(scale, d)?)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Scale s = γ²/d for a given dimension.
    pub fn scale(&self, d: usize) -> f64 {
        gamma_to_scale(self.gamma, d)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self.family {
            KernelFamily::Rbf => rbf_kernel(x, y, self.gamma),
            KernelFamily::Imq => imq_kernel(x, y, self.gamma),
        }
    }

    /// Kernel value as a function of the squared distance ‖x-y‖².
    pub fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        let u = sq_dist / (2.0 * self.gamma * self.gamma);
        match self.family {
            KernelFamily::Rbf => (-u).exp(),
            KernelFamily::Imq => 1.0 / (1.0 + u),
        }
    }
}

/// γ = √(s·d).
pub fn scale_to_gamma(scale: f64, d: usize) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidScale(scale));
    }
    Ok((scale * d as f64).sqrt())
}

/// s = γ²/d.
pub fn gamma_to_scale(gamma: f64, d: usize) -> f64 {
    gamma * gamma / d as f64
}

/// Squared euclidean distance by direct per-coordinate summation.
///
/// The expansion ‖x‖² + ‖y‖² - 2x·y is deliberately avoided: it cancels
/// catastrophically for near-coincident points.
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| {
            let t = a - b;
            t * t
        })
        .sum()
}

fn check_pair(x: &[f64], y: &[f64], gamma: f64) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    Ok(())
}

/// Gaussian RBF kernel k(x,y) = exp(-‖x-y‖²/(2γ²)).
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    check_pair(x, y, gamma)?;
    Ok((-sq_dist(x, y) / (2.0 * gamma * gamma)).exp())
}

/// Inverse multi-quadratics kernel k(x,y) = 1/(1 + ‖x-y‖²/(2γ²)).
pub fn imq_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    check_pair(x, y, gamma)?;
    Ok(1.0 / (1.0 + sq_dist(x, y) / (2.0 * gamma * gamma)))
}

/// Symmetric n×n matrix of squared distances D[i][j] = ‖z_i - z_j‖².
pub fn pairwise_sq_dists(sample: &Sample) -> Array2<f64> {
    let n = sample.n();
    let d = sample.dim();
    let flat = sample.as_flat();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        let zi = &flat[i * d..(i + 1) * d];
        for j in (i + 1)..n {
            let zj = &flat[j * d..(j + 1) * d];
            let v = sq_dist(zi, zj);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}
