//! Shared test support: definition-level oracles that recompute every
//! estimator by naive loops, a quadrature oracle for the BHEP integral, a
//! two-sample Kolmogorov-Smirnov test, and random rotations / covariances.
//!
//! Everything here is deliberately independent of the library's computation
//! paths (plain powf/exp arithmetic, no shared helpers), so agreement is
//! evidence rather than tautology.

#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use smmd::sample::Sample;

// ---------------------------------------------------------------------------
// Naive-loop estimator oracles.
// ---------------------------------------------------------------------------

fn sq_norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-sq_dist(a, b) / (2.0 * gamma * gamma)).exp()
}

fn imq(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    1.0 / (1.0 + sq_dist(a, b) / (2.0 * gamma * gamma))
}

pub fn rows_of(sample: &Sample) -> Vec<Vec<f64>> {
    (0..sample.n()).map(|i| sample.point(i).to_vec()).collect()
}

/// Unbiased closed form recomputed term by term with powf arithmetic.
pub fn naive_mmd_u(rows: &[Vec<f64>], gamma: f64) -> f64 {
    let n = rows.len();
    let d = rows[0].len() as f64;
    let g2 = gamma * gamma;
    let t1 = (g2 / (2.0 + g2)).powf(d / 2.0);
    let coef = (g2 / (1.0 + g2)).powf(d / 2.0);
    let mut t2 = 0.0;
    for z in rows {
        t2 += coef * (-sq_norm(z) / (2.0 * (1.0 + g2))).exp();
    }
    t2 *= 2.0 / n as f64;
    let mut t3 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                t3 += rbf(&rows[i], &rows[j], gamma);
            }
        }
    }
    t3 /= (n * (n - 1)) as f64;
    t1 - t2 + t3
}

/// Biased closed form: V-statistic third term, diagonal included.
pub fn naive_mmd_b(rows: &[Vec<f64>], gamma: f64) -> f64 {
    let n = rows.len();
    let d = rows[0].len() as f64;
    let g2 = gamma * gamma;
    let t1 = (g2 / (2.0 + g2)).powf(d / 2.0);
    let coef = (g2 / (1.0 + g2)).powf(d / 2.0);
    let mut t2 = 0.0;
    for z in rows {
        t2 += coef * (-sq_norm(z) / (2.0 * (1.0 + g2))).exp();
    }
    t2 *= 2.0 / n as f64;
    let mut t3 = 0.0;
    for i in 0..n {
        for j in 0..n {
            t3 += rbf(&rows[i], &rows[j], gamma);
        }
    }
    t3 /= (n * n) as f64;
    t1 - t2 + t3
}

/// Two-sample U-statistic estimator by definition-level triple loops.
pub fn naive_empirical(
    q: &[Vec<f64>],
    p: &[Vec<f64>],
    gamma: f64,
    use_imq: bool,
) -> f64 {
    let k = |a: &[f64], b: &[f64]| if use_imq { imq(a, b, gamma) } else { rbf(a, b, gamma) };
    let n = q.len() as f64;
    let mut pp = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            if i != j {
                pp += k(&p[i], &p[j]);
            }
        }
    }
    pp /= n * (n - 1.0);
    let mut pq = 0.0;
    for pi in p {
        for qj in q {
            pq += k(pi, qj);
        }
    }
    pq *= 2.0 / (n * n);
    let mut qq = 0.0;
    for i in 0..q.len() {
        for j in 0..q.len() {
            if i != j {
                qq += k(&q[i], &q[j]);
            }
        }
    }
    qq /= n * (n - 1.0);
    pp - pq + qq
}

/// Random-encoder estimator from the per-coordinate product formula.
pub fn naive_mmd_random(means: &[Vec<f64>], sds: &[Vec<f64>], gamma: f64) -> f64 {
    let n = means.len();
    let d = means[0].len();
    let g2 = gamma * gamma;
    let t1 = (g2 / (2.0 + g2)).powf(d as f64 / 2.0);

    let mut t2 = 0.0;
    for i in 0..n {
        let mut prod = 1.0;
        for k in 0..d {
            let c = 1.0 + g2 + sds[i][k] * sds[i][k];
            prod *= (g2 / c).sqrt() * (-means[i][k] * means[i][k] / (2.0 * c)).exp();
        }
        t2 += prod;
    }
    t2 *= 2.0 / n as f64;

    let mut t3 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut prod = 1.0;
            for k in 0..d {
                let c = g2 + sds[i][k] * sds[i][k] + sds[j][k] * sds[j][k];
                let m = means[i][k] - means[j][k];
                prod *= (g2 / c).sqrt() * (-m * m / (2.0 * c)).exp();
            }
            t3 += prod;
        }
    }
    t3 /= (n * n) as f64;

    t1 - t2 + t3
}

// ---------------------------------------------------------------------------
// BHEP statistic by adaptive quadrature (d = 1).
//
// W_{n,β} = ∫ |e^{-t²/2} - Ψ(t)|² φ_β(t) dt with the empirical characteristic
// function Ψ(t) = (1/n) Σ_j e^{i t z_j} and Gaussian weight
// φ_β(t) = (2πβ²)^{-1/2} e^{-t²/(2β²)}.
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// W_{n,β} for one-dimensional data by numerical quadrature.
///
/// The integrand is bounded by 4·φ_β, so mass lives inside |t| ≤ 12β; the
/// range is pre-split into panels narrower than β so the adaptive refinement
/// cannot mistake the whole integral for zero.
pub fn bhep_quadrature_1d(points: &[f64], beta: f64) -> f64 {
    let n = points.len() as f64;
    let weight_norm = 1.0 / (2.0 * std::f64::consts::PI * beta * beta).sqrt();
    let integrand = move |t: f64| -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for &z in points {
            re += (t * z).cos();
            im += (t * z).sin();
        }
        re /= n;
        im /= n;
        let gap_re = (-t * t / 2.0).exp() - re;
        let weight = weight_norm * (-t * t / (2.0 * beta * beta)).exp();
        (gap_re * gap_re + im * im) * weight
    };
    let limit = 12.0 * beta;
    let panels = 64;
    let width = 2.0 * limit / panels as f64;
    (0..panels)
        .map(|p| {
            let a = -limit + p as f64 * width;
            integrate(integrand, a, a + width, 1e-12)
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
// ---------------------------------------------------------------------------

fn ks_survival(lambda: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Returns (D, p) for the two-sided two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d_max: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / na as f64 - j as f64 / nb as f64).abs();
        d_max = d_max.max(diff);
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d_max;
    (d_max, ks_survival(lambda))
}

// ---------------------------------------------------------------------------
// Random rotations, covariances, and correlated normal sampling.
// ---------------------------------------------------------------------------

/// Haar-ish random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Array2<f64> {
    loop {
        let mut m = Array2::zeros((d, d));
        for v in m.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        let mut q: Array2<f64> = Array2::zeros((d, d));
        let mut ok = true;
        for c in 0..d {
            let mut col: Vec<f64> = (0..d).map(|r| m[[r, c]]).collect();
            for prev in 0..c {
                let dot: f64 = (0..d).map(|r| col[r] * q[[r, prev]]).sum();
                for r in 0..d {
                    col[r] -= dot * q[[r, prev]];
                }
            }
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for r in 0..d {
                q[[r, c]] = col[r] / norm;
            }
        }
        if ok {
            return q;
        }
    }
}

/// Applies x → Rx to every row.
pub fn rotate_sample(sample: &Sample, r: &Array2<f64>) -> Sample {
    Sample::new(sample.data().dot(&r.t())).expect("rotation keeps entries finite")
}

/// Lower-triangular Cholesky factor of a positive-definite matrix.
pub fn cholesky_lower(a: &Array2<f64>) -> Array2<f64> {
    let d = a.nrows();
    let mut l: Array2<f64> = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                assert!(sum > 0.0, "matrix not positive definite");
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    l
}

/// A well-conditioned random full-rank covariance G·Gᵀ + I/2.
pub fn random_covariance(rng: &mut ChaCha8Rng, d: usize) -> Array2<f64> {
    let mut g = Array2::zeros((d, d));
    for v in g.iter_mut() {
        *v = rng.sample::<f64, _>(StandardNormal);
    }
    let mut cov = g.dot(&g.t());
    for i in 0..d {
        cov[[i, i]] += 0.5;
    }
    cov
}

/// n draws from N(mean, L·Lᵀ) using the provided Cholesky factor.
pub fn correlated_normal_sample(
    rng: &mut ChaCha8Rng,
    n: usize,
    mean: &[f64],
    chol: &Array2<f64>,
) -> Sample {
    let d = mean.len();
    let mut data = Array2::zeros((n, d));
    for mut row in data.rows_mut() {
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for i in 0..d {
            let mut v = mean[i];
            for k in 0..=i {
                v += chol[[i, k]] * z[k];
            }
            row[i] = v;
        }
    }
    Sample::new(data).expect("normal draws are finite")
}

/// Gaussian sample with entries scaled by `spread`, for oracle sweeps.
pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| spread * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (tol {tol})"
    );
}
