//! Closed-form and empirical MMD² estimators against the standard
//! multivariate normal N_d, the null variance, and the standardized statistic.
//!
//! The unbiased closed form is
//!
//! ```text
//! MMD²_u = (γ²/(2+γ²))^{d/2}
//!        - (2/n)(γ²/(1+γ²))^{d/2} Σ_i exp(-‖z_i‖²/(2(1+γ²)))
//!        + (1/(n(n-1))) Σ_{i≠j} exp(-‖z_i-z_j‖²/(2γ²))
//! ```
//!
//! and the biased variant replaces the U-statistic third term by the
//! V-statistic (1/n²) Σ_{i,j}. Under the null Q = N_d the unbiased estimator
//! has mean zero and variance
//!
//! ```text
//! Var(γ,d,n) = (2/(n(n-1))) [ (γ²/(2+γ²))^d + (γ²/(4+γ²))^{d/2}
//!                             - 2 (γ⁴/((1+γ²)(3+γ²)))^{d/2} ]
//! ```
//!
//! which defines SMMD² = MMD²_u / √Var. All power terms are evaluated as
//! exp((d/2)(ln γ² - ln(c+γ²))), written with ln_1p so they stay accurate for
//! large d and extreme widths.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kernels::{sq_dist, KernelSpec};
use crate::sample::Sample;

/// Which estimator produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    ClosedFormUnbiased,
    ClosedFormBiased,
    RandomEncoder,
    EmpiricalUnbiasedRbf,
    EmpiricalUnbiasedImq,
}

/// An MMD² value together with the configuration that produced it.
/// Unbiased values may be negative by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdEstimate {
    pub value: f64,
    pub kind: EstimatorKind,
    pub kernel: KernelSpec,
    pub n: usize,
    pub d: usize,
}

impl MmdEstimate {
    pub fn closed_unbiased(sample: &Sample, gamma: f64) -> Result<Self> {
        Ok(Self {
            value: mmd_u_closed(sample, gamma)?,
            kind: EstimatorKind::ClosedFormUnbiased,
            kernel: KernelSpec::rbf(gamma)?,
            n: sample.n(),
            d: sample.dim(),
        })
    }

    pub fn closed_biased(sample: &Sample, gamma: f64) -> Result<Self> {
        Ok(Self {
            value: mmd_b_closed(sample, gamma)?,
            kind: EstimatorKind::ClosedFormBiased,
            kernel: KernelSpec::rbf(gamma)?,
            n: sample.n(),
            d: sample.dim(),
        })
    }

    pub fn random_encoder(codes: &RandomCodes, gamma: f64) -> Result<Self> {
        Ok(Self {
            value: mmd_u_random(codes, gamma)?,
            kind: EstimatorKind::RandomEncoder,
            kernel: KernelSpec::rbf(gamma)?,
            n: codes.n(),
            d: codes.dim(),
        })
    }

    pub fn empirical(sample_q: &Sample, sample_p: &Sample, kernel: &KernelSpec) -> Result<Self> {
        let kind = match kernel.family() {
            crate::kernels::KernelFamily::Rbf => EstimatorKind::EmpiricalUnbiasedRbf,
            crate::kernels::KernelFamily::Imq => EstimatorKind::EmpiricalUnbiasedImq,
        };
        Ok(Self {
            value: mmd_u_empirical(sample_q, sample_p, kernel)?,
            kind,
            kernel: *kernel,
            n: sample_q.n(),
            d: sample_q.dim(),
        })
    }
}

/// Per-point Gaussian code distributions z_i ~ N(μ_i, diag(σ_i²)) produced by
/// a random encoder. `means` and `sds` are both n×d.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCodes {
    means: Array2<f64>,
    sds: Array2<f64>,
}

impl RandomCodes {
    pub fn new(means: Array2<f64>, sds: Array2<f64>) -> Result<Self> {
        let (n, d) = means.dim();
        if n == 0 || d == 0 {
            return Err(Error::EmptySample);
        }
        if means.dim() != sds.dim() {
            return Err(Error::DimensionMismatch {
                left: means.ncols(),
                right: sds.ncols(),
            });
        }
        for ((row, col), &v) in means.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        for ((row, col), &s) in sds.indexed_iter() {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidSd { row, col });
            }
        }
        Ok(Self { means, sds })
    }

    pub fn n(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn sds(&self) -> &Array2<f64> {
        &self.sds
    }

    /// True when every row has a single σ value across all dimensions, so the
    /// cheaper isotropic form applies.
    pub fn is_isotropic(&self) -> bool {
        self.sds
            .rows()
            .into_iter()
            .all(|row| row.iter().all(|&s| s == row[0]))
    }
}

/// (γ²/(c+γ²))^{d/2} evaluated in log space.
fn ratio_half_pow(gamma2: f64, c: f64, d: usize) -> f64 {
    (-0.5 * d as f64 * (c / gamma2).ln_1p()).exp()
}

fn check_gamma(gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    Ok(gamma * gamma)
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Sample-average second term: (1/n) Σ_i exp(-‖z_i‖²/(2(1+γ²))), without the
/// leading factor 2(γ²/(1+γ²))^{d/2}.
fn mean_origin_pull(sample: &Sample, gamma2: f64) -> f64 {
    let inv_two_h = 1.0 / (2.0 * (1.0 + gamma2));
    let total: f64 = sample.rows().map(|z| (-sq_norm(z) * inv_two_h).exp()).sum();
    total / sample.n() as f64
}

/// Off-diagonal kernel sum Σ_{i<j} exp(-‖z_i-z_j‖²/(2γ²)).
fn upper_kernel_sum(sample: &Sample, gamma2: f64) -> f64 {
    let n = sample.n();
    let d = sample.dim();
    let flat = sample.as_flat();
    let inv_two_g = 1.0 / (2.0 * gamma2);
    let mut acc = 0.0;
    for i in 0..n {
        let zi = &flat[i * d..(i + 1) * d];
        for j in (i + 1)..n {
            let zj = &flat[j * d..(j + 1) * d];
            acc += (-sq_dist(zi, zj) * inv_two_g).exp();
        }
    }
    acc
}

fn closed_form_terms(sample: &Sample, gamma: f64) -> Result<(f64, f64, f64)> {
    let gamma2 = check_gamma(gamma)?;
    let d = sample.dim();
    let t1 = ratio_half_pow(gamma2, 2.0, d);
    let t2 = 2.0 * ratio_half_pow(gamma2, 1.0, d) * mean_origin_pull(sample, gamma2);
    let pair_sum = upper_kernel_sum(sample, gamma2);
    Ok((t1, t2, pair_sum))
}

/// Unbiased closed-form estimator MMD²_u(N_d, Q_n). Requires n ≥ 2.
pub fn mmd_u_closed(sample: &Sample, gamma: f64) -> Result<f64> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleTooSmall(n));
    }
    let (t1, t2, pair_sum) = closed_form_terms(sample, gamma)?;
    let nf = n as f64;
    Ok(t1 - t2 + 2.0 * pair_sum / (nf * (nf - 1.0)))
}

/// Biased closed-form estimator MMD²_b(N_d, Q_n); the third term is the
/// V-statistic, so n = 1 is allowed. Coincides with the BHEP statistic
/// W_{n,β} for β = 1/γ.
pub fn mmd_b_closed(sample: &Sample, gamma: f64) -> Result<f64> {
    let (t1, t2, pair_sum) = closed_form_terms(sample, gamma)?;
    let nf = sample.n() as f64;
    // diagonal kernel entries are exactly 1
    Ok(t1 - t2 + (nf + 2.0 * pair_sum) / (nf * nf))
}

/// Closed-form variance of MMD²_u under the null Q = N_d.
///
/// The bracket is evaluated around its third term with expm1 so the value
/// stays positive instead of drowning in cancellation as γ → ∞.
pub fn null_variance(gamma: f64, d: usize, n: usize) -> Result<f64> {
    let gamma2 = check_gamma(gamma)?;
    if n < 2 {
        return Err(Error::SampleTooSmall(n));
    }
    let df = d as f64;
    let nf = n as f64;
    // log of each bracket term; t3 is the cross term
    let l1 = -df * (2.0 / gamma2).ln_1p();
    let l2 = -0.5 * df * (4.0 / gamma2).ln_1p();
    let l3 = -0.5 * df * ((1.0 / gamma2).ln_1p() + (3.0 / gamma2).ln_1p());
    let bracket = l3.exp() * ((l1 - l3).exp_m1() + (l2 - l3).exp_m1());
    Ok(2.0 / (nf * (nf - 1.0)) * bracket)
}

/// Standardized statistic SMMD²(Q_n) = MMD²_u / √Var(γ,d,n); zero mean and
/// unit variance under the null.
pub fn smmd(sample: &Sample, gamma: f64) -> Result<f64> {
    let value = mmd_u_closed(sample, gamma)?;
    let var = null_variance(gamma, sample.dim(), sample.n())?;
    Ok(value / var.sqrt())
}

/// Unbiased estimator for a Gaussian random encoder, where the batch
/// distribution is the mixture (1/n) Σ_i N(μ_i, diag(σ_i²)).
///
/// The third term averages over *all* pairs (i,j): drawing twice from the
/// same mixture component is legitimate when σ_i > 0. With σ ≡ 0 the value
/// therefore reduces to `mmd_b_closed` on the means, not `mmd_u_closed`.
pub fn mmd_u_random(codes: &RandomCodes, gamma: f64) -> Result<f64> {
    let gamma2 = check_gamma(gamma)?;
    if codes.is_isotropic() {
        return Ok(mmd_u_random_isotropic(codes, gamma2));
    }
    Ok(mmd_u_random_general(codes, gamma2))
}

fn mmd_u_random_general(codes: &RandomCodes, gamma2: f64) -> f64 {
    let n = codes.n();
    let d = codes.dim();
    let means = codes.means();
    let sds = codes.sds();
    let nf = n as f64;
    let lg = gamma2.ln();

    let t1 = ratio_half_pow(gamma2, 2.0, d);

    let mut pull = 0.0;
    for i in 0..n {
        let mut log_term = 0.0;
        for k in 0..d {
            let c = 1.0 + gamma2 + sds[[i, k]] * sds[[i, k]];
            let m = means[[i, k]];
            log_term += 0.5 * (lg - c.ln()) - m * m / (2.0 * c);
        }
        pull += log_term.exp();
    }
    let t2 = 2.0 / nf * pull;

    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut log_term = 0.0;
            for k in 0..d {
                let c = gamma2 + sds[[i, k]] * sds[[i, k]] + sds[[j, k]] * sds[[j, k]];
                let m = means[[i, k]] - means[[j, k]];
                log_term += 0.5 * (lg - c.ln()) - m * m / (2.0 * c);
            }
            pairs += log_term.exp();
        }
    }
    let t3 = pairs / (nf * nf);

    t1 - t2 + t3
}

fn mmd_u_random_isotropic(codes: &RandomCodes, gamma2: f64) -> f64 {
    let n = codes.n();
    let d = codes.dim();
    let means = codes.means();
    let nf = n as f64;
    let row_var: Vec<f64> = (0..n).map(|i| codes.sds()[[i, 0]] * codes.sds()[[i, 0]]).collect();

    let mean_rows: Vec<&[f64]> = means
        .as_slice()
        .expect("means are row-major")
        .chunks_exact(d)
        .collect();

    let t1 = ratio_half_pow(gamma2, 2.0, d);

    let mut pull = 0.0;
    for i in 0..n {
        let c = 1.0 + row_var[i];
        pull += ratio_half_pow(gamma2, c, d) * (-sq_norm(mean_rows[i]) / (2.0 * (c + gamma2))).exp();
    }
    let t2 = 2.0 / nf * pull;

    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = row_var[i] + row_var[j];
            pairs += ratio_half_pow(gamma2, c, d)
                * (-sq_dist(mean_rows[i], mean_rows[j]) / (2.0 * (c + gamma2))).exp();
        }
    }
    let t3 = pairs / (nf * nf);

    t1 - t2 + t3
}

/// Standard two-sample U-statistic estimate of MMD²(P, Q) from a reference
/// sample (second argument) and a code sample (first argument). Both samples
/// must have the same size n ≥ 2; the cross term uses 2/n².
pub fn mmd_u_empirical(sample_q: &Sample, sample_p: &Sample, kernel: &KernelSpec) -> Result<f64> {
    if sample_q.dim() != sample_p.dim() {
        return Err(Error::DimensionMismatch {
            left: sample_q.dim(),
            right: sample_p.dim(),
        });
    }
    let n = sample_q.n();
    if sample_p.n() != n {
        return Err(Error::UnequalSampleSizes {
            q: n,
            p: sample_p.n(),
        });
    }
    if n < 2 {
        return Err(Error::SampleTooSmall(n.min(sample_p.n())));
    }
    let nf = n as f64;

    let within = |s: &Sample| -> f64 {
        let mut acc = 0.0;
        for (i, zi) in s.rows().enumerate() {
            for zj in s.rows().skip(i + 1) {
                acc += kernel.eval_sq_dist(sq_dist(zi, zj));
            }
        }
        2.0 * acc / (nf * (nf - 1.0))
    };

    let mut cross = 0.0;
    for p in sample_p.rows() {
        for q in sample_q.rows() {
            cross += kernel.eval_sq_dist(sq_dist(p, q));
        }
    }
    cross *= 2.0 / (nf * nf);

    Ok(within(sample_p) - cross + within(sample_q))
}

/// Henze-Zirkler kernel width γ_{d,n} = √2 ((2d+1)n/4)^{-1/(d+4)} from
/// optimal density-estimation theory.
pub fn hz_gamma(d: usize, n: usize) -> f64 {
    let base = (2.0 * d as f64 + 1.0) * n as f64 / 4.0;
    std::f64::consts::SQRT_2 * base.powf(-1.0 / (d as f64 + 4.0))
}

/// Change in MMD²_u when point `index` is replaced: MMD²_u(Q'_n) - MMD²_u(Q_n),
/// computed by two full evaluations.
pub fn outlier_delta(
    sample: &Sample,
    index: usize,
    replacement: &[f64],
    gamma: f64,
) -> Result<f64> {
    let n = sample.n();
    let d = sample.dim();
    if index >= n {
        return Err(Error::IndexOutOfRange { index, n });
    }
    if replacement.len() != d {
        return Err(Error::DimensionMismatch {
            left: d,
            right: replacement.len(),
        });
    }
    let mut modified = sample.data().clone();
    for (k, &v) in replacement.iter().enumerate() {
        modified[[index, k]] = v;
    }
    let modified = Sample::new(modified)?;
    Ok(mmd_u_closed(&modified, gamma)? - mmd_u_closed(sample, gamma)?)
}

/// The translation t* minimizing MMD²_u(Q_n + t) over shifts.
///
/// Only the origin-pull term varies under translation, and up to constants it
/// is a kernel density estimate over the sample with squared width 1 + γ²;
/// the optimal shift moves the KDE mode to the origin. The mode is located by
/// mean-shift iteration started from every sample point, keeping the start
/// with the highest KDE value (ties broken by lowest start index).
pub fn optimal_translation(sample: &Sample, gamma: f64) -> Result<Vec<f64>> {
    let gamma2 = check_gamma(gamma)?;
    let d = sample.dim();
    let inv_two_h = 1.0 / (2.0 * (1.0 + gamma2));

    let kde = |u: &[f64]| -> f64 {
        sample.rows().map(|z| (-sq_dist(z, u) * inv_two_h).exp()).sum()
    };

    let mut best_mode: Vec<f64> = sample.point(0).to_vec();
    let mut best_value = f64::NEG_INFINITY;

    for start in sample.rows() {
        let mut u = start.to_vec();
        for _ in 0..1000 {
            let mut weight_sum = 0.0;
            let mut next = vec![0.0; d];
            for z in sample.rows() {
                let w = (-sq_dist(z, &u) * inv_two_h).exp();
                weight_sum += w;
                for k in 0..d {
                    next[k] += w * z[k];
                }
            }
            for v in &mut next {
                *v /= weight_sum;
            }
            let step_norm = sq_dist(&next, &u).sqrt();
            u = next;
            if step_norm < 1e-10 {
                break;
            }
        }
        let value = kde(&u);
        if value > best_value {
            best_value = value;
            best_mode = u;
        }
    }

    Ok(best_mode.iter().map(|v| -v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn translated(sample: &Sample, t: &[f64]) -> Sample {
        let mut data = sample.data().clone();
        for mut row in data.rows_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v += t[k];
            }
        }
        Sample::new(data).unwrap()
    }

    #[test]
    fn mmd_u_hand_value_zero_sample() {
        // all z_i = 0, d=2, gamma^2=2, n=2: 0.5 - 4/3 + 1 = 1/6
        let sample = Sample::new(Array2::zeros((2, 2))).unwrap();
        let v = mmd_u_closed(&sample, 2f64.sqrt()).unwrap();
        assert!(close(v, 1.0 / 6.0, 1e-14), "got {v}");
    }

    #[test]
    fn mmd_u_requires_two_points() {
        let single = Sample::from_rows(&[vec![0.0]]).unwrap();
        assert!(matches!(
            mmd_u_closed(&single, 1.0),
            Err(Error::SampleTooSmall(1))
        ));
    }

    #[test]
    fn mmd_b_hand_value_single_point() {
        // z=0, d=1, gamma=1: (1/3)^{1/2} - 2 (1/2)^{1/2} + 1
        let sample = Sample::from_rows(&[vec![0.0]]).unwrap();
        let v = mmd_b_closed(&sample, 1.0).unwrap();
        let expect = (1.0f64 / 3.0).sqrt() - 2.0 * 0.5f64.sqrt() + 1.0;
        assert!(close(v, expect, 1e-14));
        assert!(close(v, 0.16314, 1e-5));
    }

    #[test]
    fn biased_minus_unbiased_matches_term_recomputation() {
        let sample = Sample::from_rows(&[
            vec![0.3, -1.2],
            vec![1.7, 0.4],
            vec![-0.5, 0.9],
            vec![0.0, 2.2],
        ])
        .unwrap();
        let gamma = 0.9;
        let diff =
            mmd_b_closed(&sample, gamma).unwrap() - mmd_u_closed(&sample, gamma).unwrap();
        // recompute (1/n^2) sum_{ij} k_ij - (1/(n(n-1))) sum_{i!=j} k_ij directly
        let n = sample.n() as f64;
        let mut all = 0.0;
        let mut off = 0.0;
        for (i, zi) in sample.rows().enumerate() {
            for (j, zj) in sample.rows().enumerate() {
                let k = (-sq_dist(zi, zj) / (2.0 * gamma * gamma)).exp();
                all += k;
                if i != j {
                    off += k;
                }
            }
        }
        let expect = all / (n * n) - off / (n * (n - 1.0));
        assert!(close(diff, expect, 1e-14));
    }

    #[test]
    fn null_variance_hand_value_and_limit() {
        // gamma^2=1, d=1, n=2: 1/3 + (1/5)^{1/2} - 2 (1/8)^{1/2}
        let v = null_variance(1.0, 1, 2).unwrap();
        let expect = 1.0 / 3.0 + 0.2f64.sqrt() - 2.0 * 0.125f64.sqrt();
        assert!(close(v, expect, 1e-14));
        assert!(close(v, 0.07344, 1e-5));

        // gamma -> infinity: variance -> 0 from above
        let tiny = null_variance(1e6, 4, 100).unwrap();
        assert!((0.0..1e-12).contains(&tiny), "got {tiny}");
        assert!(matches!(null_variance(1.0, 1, 1), Err(Error::SampleTooSmall(1))));
    }

    #[test]
    fn null_variance_positive_across_grid() {
        for &d in &[1usize, 2, 8, 32, 64] {
            for &s in &[1.0 / 32.0, 0.125, 1.0, 2.0, 100.0] {
                let gamma = (s * d as f64).sqrt();
                let v = null_variance(gamma, d, 100).unwrap();
                assert!(v > 0.0, "d={d} s={s} gave {v}");
            }
        }
    }

    #[test]
    fn smmd_hand_value() {
        let sample = Sample::new(Array2::zeros((2, 2))).unwrap();
        let v = smmd(&sample, 2f64.sqrt()).unwrap();
        assert!(close(v, (1.0 / 6.0) / 0.05f64.sqrt(), 1e-12));
        assert!(close(v, 0.74536, 1e-5));
    }

    #[test]
    fn random_encoder_reduces_to_biased_at_zero_sigma() {
        let means = array![[0.4, -1.0], [2.0, 0.3], [-0.7, 0.1]];
        let codes = RandomCodes::new(means.clone(), Array2::zeros((3, 2))).unwrap();
        let sample = Sample::new(means).unwrap();
        let a = mmd_u_random(&codes, 0.8).unwrap();
        let b = mmd_b_closed(&sample, 0.8).unwrap();
        assert!(close(a, b, 1e-12), "{a} vs {b}");
    }

    #[test]
    fn random_encoder_single_point_hand_value() {
        let codes = RandomCodes::new(array![[0.0]], array![[0.0]]).unwrap();
        let v = mmd_u_random(&codes, 1.0).unwrap();
        assert!(close(v, 0.16314, 1e-5));
    }

    #[test]
    fn random_encoder_isotropic_matches_general() {
        let means = array![[0.4, -1.0, 0.2], [2.0, 0.3, -0.6]];
        let sds_iso = array![[0.5, 0.5, 0.5], [1.2, 1.2, 1.2]];
        let codes = RandomCodes::new(means.clone(), sds_iso).unwrap();
        assert!(codes.is_isotropic());
        let fast = mmd_u_random(&codes, 0.9).unwrap();
        let slow = mmd_u_random_general(&codes, 0.81);
        assert!(close(fast, slow, 1e-12), "{fast} vs {slow}");

        let sds_diag = array![[0.5, 0.6, 0.5], [1.2, 1.2, 1.2]];
        let diag = RandomCodes::new(means, sds_diag).unwrap();
        assert!(!diag.is_isotropic());
    }

    #[test]
    fn random_encoder_rejects_negative_sigma() {
        let err = RandomCodes::new(array![[0.0]], array![[-1.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidSd { .. }));
    }

    #[test]
    fn empirical_hand_value() {
        // X = {0,1}, Y = {0,1}, d=1, RBF gamma=1 -> e^{-1/2} - 1
        let x = Sample::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let y = x.clone();
        let kernel = KernelSpec::rbf(1.0).unwrap();
        let v = mmd_u_empirical(&x, &y, &kernel).unwrap();
        assert!(close(v, (-0.5f64).exp() - 1.0, 1e-14));
        assert!(close(v, -0.39347, 1e-5));
    }

    #[test]
    fn empirical_identical_samples_term_identity() {
        let s = Sample::from_rows(&[vec![0.1, 2.0], vec![-0.4, 0.7], vec![1.3, -0.2]]).unwrap();
        let kernel = KernelSpec::rbf(0.8).unwrap();
        let v = mmd_u_empirical(&s, &s, &kernel).unwrap();
        let n = s.n() as f64;
        let mut off = 0.0;
        let mut all = 0.0;
        for (i, zi) in s.rows().enumerate() {
            for (j, zj) in s.rows().enumerate() {
                let k = kernel.eval_sq_dist(sq_dist(zi, zj));
                all += k;
                if i != j {
                    off += k;
                }
            }
        }
        let expect = 2.0 * off / (n * (n - 1.0)) - 2.0 * all / (n * n);
        assert!(close(v, expect, 1e-14));
    }

    #[test]
    fn empirical_rejects_bad_shapes() {
        let x = Sample::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let y3 = Sample::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let y2d = Sample::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let kernel = KernelSpec::rbf(1.0).unwrap();
        assert!(matches!(
            mmd_u_empirical(&x, &y3, &kernel),
            Err(Error::UnequalSampleSizes { q: 2, p: 3 })
        ));
        assert!(matches!(
            mmd_u_empirical(&x, &y2d, &kernel),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn estimate_carriers_wrap_the_raw_values() {
        let sample = Sample::from_rows(&[vec![0.4, -0.2], vec![1.0, 0.7], vec![-0.3, 0.1]])
            .unwrap();
        let gamma = 1.1;
        let u = MmdEstimate::closed_unbiased(&sample, gamma).unwrap();
        assert_eq!(u.kind, EstimatorKind::ClosedFormUnbiased);
        assert_eq!(u.value, mmd_u_closed(&sample, gamma).unwrap());
        assert_eq!((u.n, u.d), (3, 2));
        let b = MmdEstimate::closed_biased(&sample, gamma).unwrap();
        assert_eq!(b.value, mmd_b_closed(&sample, gamma).unwrap());

        let imq = KernelSpec::imq(gamma).unwrap();
        let e = MmdEstimate::empirical(&sample, &sample, &imq).unwrap();
        assert_eq!(e.kind, EstimatorKind::EmpiricalUnbiasedImq);

        let codes =
            RandomCodes::new(sample.data().clone(), Array2::zeros((3, 2))).unwrap();
        let r = MmdEstimate::random_encoder(&codes, gamma).unwrap();
        assert_eq!(r.kind, EstimatorKind::RandomEncoder);
        assert_eq!(r.value, mmd_u_random(&codes, gamma).unwrap());
    }

    #[test]
    fn hz_gamma_hand_values() {
        let v = hz_gamma(1, 100);
        assert!(close(v, std::f64::consts::SQRT_2 * 75f64.powf(-0.2), 1e-15));
        assert!(close(v, 0.59635, 1e-5));
        let v4 = hz_gamma(4, 100);
        assert!(close(v4, std::f64::consts::SQRT_2 * 225f64.powf(-0.125), 1e-10));
        // d fixed, n growing: monotone to zero
        let mut prev = f64::INFINITY;
        for &n in &[10, 100, 1000, 100000, 10000000] {
            let g = hz_gamma(3, n);
            assert!(g < prev && g > 0.0);
            prev = g;
        }
    }

    #[test]
    fn outlier_delta_identity_and_antisymmetry() {
        let sample = Sample::from_rows(&[vec![0.5, -0.3], vec![1.1, 0.2], vec![-0.8, 0.9]])
            .unwrap();
        let gamma = 0.7;
        let same = sample.point(1).to_vec();
        assert_eq!(outlier_delta(&sample, 1, &same, gamma).unwrap(), 0.0);

        let replacement = [3.0, -2.0];
        let forward = outlier_delta(&sample, 0, &replacement, gamma).unwrap();
        let mut modified = sample.data().clone();
        modified[[0, 0]] = replacement[0];
        modified[[0, 1]] = replacement[1];
        let modified = Sample::new(modified).unwrap();
        let original_row = sample.point(0).to_vec();
        let backward = outlier_delta(&modified, 0, &original_row, gamma).unwrap();
        assert!(close(forward, -backward, 1e-15));

        assert!(matches!(
            outlier_delta(&sample, 3, &replacement, gamma),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        ));
    }

    #[test]
    fn optimal_translation_single_point() {
        let sample = Sample::from_rows(&[vec![5.0]]).unwrap();
        let t = optimal_translation(&sample, 1.0).unwrap();
        assert!(close(t[0], -5.0, 1e-9));
    }

    #[test]
    fn optimal_translation_symmetric_pair_small_gap() {
        // a << sqrt(1+gamma^2): unimodal KDE, mode at the midpoint 0
        let sample = Sample::from_rows(&[vec![-0.2], vec![0.2]]).unwrap();
        let t = optimal_translation(&sample, 2.0).unwrap();
        assert!(t[0].abs() < 1e-8, "got {}", t[0]);
    }

    #[test]
    fn optimal_translation_beats_mean_shift_and_identity() {
        let sample = Sample::from_rows(&[vec![-6.0, 0.5], vec![6.2, -0.1], vec![5.8, 0.3]])
            .unwrap();
        let gamma = 1.0;
        let t = optimal_translation(&sample, gamma).unwrap();
        let at_opt = mmd_u_closed(&translated(&sample, &t), gamma).unwrap();
        let at_zero = mmd_u_closed(&sample, gamma).unwrap();
        let mean: Vec<f64> = (0..sample.dim())
            .map(|k| -sample.data().column(k).mean().unwrap())
            .collect();
        let at_mean = mmd_u_closed(&translated(&sample, &mean), gamma).unwrap();
        assert!(at_opt <= at_zero + 1e-12);
        assert!(at_opt <= at_mean + 1e-12);
    }
}
