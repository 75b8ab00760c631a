//! Batch transforms applied to codes before an estimator sees them:
//! per-dimension centering and scaling ("code normalization"), its
//! random-encoder counterpart, and full centering plus whitening.
//!
//! Code normalization uses the unbiased per-dimension variance (divisor
//! n-1). The random-encoder variant standardizes the Gaussian-mixture
//! moments, which are defined with divisor n; the two conventions differ by
//! the factor √(n/(n-1)) and are kept exactly as each formula states.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::estimators::RandomCodes;
use crate::linalg::sym_inv_sqrt;
use crate::sample::Sample;

/// Per-batch moments. `covariance` is filled only when whitening needs it.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Array1<f64>,
    pub per_dim_sd: Array1<f64>,
    pub covariance: Option<Array2<f64>>,
}

/// Mean, unbiased per-dimension standard deviation, and optionally the full
/// unbiased sample covariance of a batch. Requires n ≥ 2.
pub fn batch_stats(sample: &Sample, with_covariance: bool) -> Result<BatchStats> {
    let n = sample.n();
    let d = sample.dim();
    if n < 2 {
        return Err(Error::SampleTooSmall(n));
    }
    let nf = n as f64;
    let data = sample.data();

    let mean: Array1<f64> = data.sum_axis(ndarray::Axis(0)) / nf;

    let mut per_dim_var = Array1::zeros(d);
    for row in data.rows() {
        for k in 0..d {
            let c = row[k] - mean[k];
            per_dim_var[k] += c * c;
        }
    }
    per_dim_var /= nf - 1.0;
    for k in 0..d {
        if per_dim_var[k] <= 0.0 {
            return Err(Error::ZeroVariance(k));
        }
    }
    let per_dim_sd = per_dim_var.mapv(f64::sqrt);

    let covariance = if with_covariance {
        let mut cov = Array2::zeros((d, d));
        for row in data.rows() {
            for i in 0..d {
                let ci = row[i] - mean[i];
                for j in i..d {
                    cov[[i, j]] += ci * (row[j] - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                cov[[i, j]] /= nf - 1.0;
                cov[[j, i]] = cov[[i, j]];
            }
        }
        Some(cov)
    } else {
        None
    };

    Ok(BatchStats {
        mean,
        per_dim_sd,
        covariance,
    })
}

/// Centers and scales each dimension to zero mean and unit unbiased variance.
pub fn code_normalize(sample: &Sample) -> Result<Sample> {
    let stats = batch_stats(sample, false)?;
    let mut out = sample.data().clone();
    for mut row in out.rows_mut() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = (*v - stats.mean[k]) / stats.per_dim_sd[k];
        }
    }
    Sample::new(out)
}

/// Same transform as `code_normalize`; this name matches the Monte-Carlo
/// procedure for the diagonal-covariance composite null.
pub fn center_scale(sample: &Sample) -> Result<Sample> {
    code_normalize(sample)
}

/// Code normalization for a Gaussian random encoder.
///
/// The batch mixture (1/n) Σ_i N(μ_i, diag(σ_i²)) has per-dimension moments
/// Mean_k = (1/n) Σ_i μ_ik and Var_k = (1/n) Σ_i (μ_ik² + σ_ik²) - Mean_k²;
/// means are shifted and scaled, standard deviations only scaled, so the
/// transformed mixture is exactly standardized.
pub fn code_normalize_random(codes: &RandomCodes) -> Result<RandomCodes> {
    let n = codes.n();
    let d = codes.dim();
    let nf = n as f64;
    let means = codes.means();
    let sds = codes.sds();

    let mut mix_mean = vec![0.0; d];
    let mut mix_second = vec![0.0; d];
    for i in 0..n {
        for k in 0..d {
            mix_mean[k] += means[[i, k]];
            mix_second[k] += means[[i, k]] * means[[i, k]] + sds[[i, k]] * sds[[i, k]];
        }
    }
    let mut mix_sd = vec![0.0; d];
    for k in 0..d {
        mix_mean[k] /= nf;
        let var = mix_second[k] / nf - mix_mean[k] * mix_mean[k];
        if var <= 0.0 {
            return Err(Error::ZeroVariance(k));
        }
        mix_sd[k] = var.sqrt();
    }

    let mut new_means = means.clone();
    let mut new_sds = sds.clone();
    for i in 0..n {
        for k in 0..d {
            new_means[[i, k]] = (means[[i, k]] - mix_mean[k]) / mix_sd[k];
            new_sds[[i, k]] = sds[[i, k]] / mix_sd[k];
        }
    }
    RandomCodes::new(new_means, new_sds)
}

/// Centers by the sample mean and whitens by the symmetric inverse square
/// root of the unbiased sample covariance: Z_i = S^{-1/2}(X_i - X̄).
///
/// The output satisfies n⁻¹ Σ Z_i = 0 and (n-1)⁻¹ Σ Z_i Z_iᵀ = I, which are
/// exactly the dependencies the composite-null Monte Carlo needs.
pub fn center_whiten(sample: &Sample) -> Result<Sample> {
    let n = sample.n();
    let d = sample.dim();
    if n < d + 1 {
        return Err(Error::TooFewPointsForWhitening { n, d });
    }
    let stats = batch_stats(sample, true)?;
    let cov = stats.covariance.expect("requested above");
    let w = sym_inv_sqrt(&cov)?;

    let mut centered = sample.data().clone();
    for mut row in centered.rows_mut() {
        for (k, v) in row.iter_mut().enumerate() {
            *v -= stats.mean[k];
        }
    }
    Sample::new(centered.dot(&w.t()))
}
