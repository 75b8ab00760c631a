//! Synthetic-data experiment harness: discrimination power τ between the
//! standard normal and an alternative, null-standardization checks, threshold
//! tables, and the outlier-insensitivity experiment.
//!
//! Everything is a pure function of (specification, seed): replicate i reads
//! substream i of the run's seed, so parallel and serial runs agree
//! bit-exactly and reruns reproduce output byte-for-byte.

use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{hz_gamma, mmd_u_empirical, smmd, EstimatorKind};
use crate::kernels::{gamma_to_scale, scale_to_gamma, KernelSpec};
use crate::rng::{derive_seed, standard_normal_sample, substream};
use crate::sample::Sample;
use crate::testing::{load_or_simulate, threshold, NullSpec, SampleType};

const SQRT_3: f64 = 1.7320508075688772;

/// A kernel scale s = γ²/d, either fixed or the Henze-Zirkler width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleChoice {
    Fixed(f64),
    Hz,
}

impl ScaleChoice {
    pub fn gamma(&self, d: usize, n: usize) -> Result<f64> {
        match self {
            ScaleChoice::Fixed(s) => scale_to_gamma(*s, d),
            ScaleChoice::Hz => Ok(hz_gamma(d, n)),
        }
    }

    /// Numeric scale value s = γ²/d implied for a given (d, n).
    pub fn scale_value(&self, d: usize, n: usize) -> Result<f64> {
        Ok(gamma_to_scale(self.gamma(d, n)?, d))
    }

    pub fn label(&self) -> String {
        match self {
            ScaleChoice::Fixed(s) => format!("{s}"),
            ScaleChoice::Hz => "hz".to_string(),
        }
    }
}

impl FromStr for ScaleChoice {
    type Err = Error;

    /// Accepts "hz", plain decimals ("0.125"), and fractions ("1/8").
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if trimmed.eq_ignore_ascii_case("hz") {
            return Ok(ScaleChoice::Hz);
        }
        let value = if let Some((num, den)) = trimmed.split_once('/') {
            let num: f64 = num.trim().parse().map_err(|_| Error::InvalidScale(f64::NAN))?;
            let den: f64 = den.trim().parse().map_err(|_| Error::InvalidScale(f64::NAN))?;
            num / den
        } else {
            trimmed.parse().map_err(|_| Error::InvalidScale(f64::NAN))?
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidScale(value));
        }
        Ok(ScaleChoice::Fixed(value))
    }
}

/// Dimension grid shared by the benchmark experiments.
pub fn benchmark_dims() -> Vec<usize> {
    vec![1, 2, 4, 8, 16, 32]
}

/// RBF scale grid: {2, 1, 1/2, ..., 1/32} plus the HZ width.
pub fn rbf_scale_grid() -> Vec<ScaleChoice> {
    let mut g: Vec<ScaleChoice> = [2.0, 1.0, 0.5, 0.25, 0.125, 1.0 / 16.0, 1.0 / 32.0]
        .iter()
        .map(|&s| ScaleChoice::Fixed(s))
        .collect();
    g.push(ScaleChoice::Hz);
    g
}

/// IMQ scale grid, extended down to 1/1024 to account for the slower tail.
pub fn imq_scale_grid() -> Vec<ScaleChoice> {
    (0..=11).map(|k| ScaleChoice::Fixed(2.0 / (1u64 << k) as f64)).collect()
}

/// Scale columns of the thresholds table: {1, 1/2, 1/4, 1/8, 1/16} plus HZ.
pub fn threshold_scale_grid() -> Vec<ScaleChoice> {
    let mut g: Vec<ScaleChoice> = [1.0, 0.5, 0.25, 0.125, 1.0 / 16.0]
        .iter()
        .map(|&s| ScaleChoice::Fixed(s))
        .collect();
    g.push(ScaleChoice::Hz);
    g
}

/// How a batch of codes is generated.
#[derive(Debug, Clone)]
pub enum AlternativeKind {
    /// The null itself: N(0, I).
    StandardNormal,
    /// U[-√3, √3]^d — zero mean, unit variance per dimension.
    UniformCube,
    /// N(0, I) with z_1 replaced by magnitude·1.
    OutlierInjected { magnitude: f64 },
    /// Rows drawn without replacement from a user-supplied matrix.
    External { data: Array2<f64>, label: String },
}

#[derive(Debug, Clone)]
pub struct AlternativeSpec {
    pub kind: AlternativeKind,
    pub d: usize,
    pub n: usize,
}

impl AlternativeSpec {
    pub fn new(kind: AlternativeKind, d: usize, n: usize) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::EmptySample);
        }
        if let AlternativeKind::External { data, .. } = &kind {
            if data.ncols() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: data.ncols(),
                });
            }
            if data.nrows() < n {
                return Err(Error::NotEnoughRows {
                    rows: data.nrows(),
                    n,
                });
            }
        }
        Ok(Self { kind, d, n })
    }

    pub fn label(&self) -> String {
        match &self.kind {
            AlternativeKind::StandardNormal => "standard_normal".to_string(),
            AlternativeKind::UniformCube => "uniform_cube".to_string(),
            AlternativeKind::OutlierInjected { magnitude } => {
                format!("outlier_injected_{magnitude}")
            }
            AlternativeKind::External { label, .. } => format!("external_{label}"),
        }
    }
}

/// Draws one n×d batch from the alternative.
pub fn sample_alternative<R: Rng>(spec: &AlternativeSpec, rng: &mut R) -> Result<Sample> {
    match &spec.kind {
        AlternativeKind::StandardNormal => Ok(standard_normal_sample(rng, spec.n, spec.d)),
        AlternativeKind::UniformCube => {
            let mut data = Vec::with_capacity(spec.n * spec.d);
            for _ in 0..spec.n * spec.d {
                data.push(rng.random_range(-SQRT_3..SQRT_3));
            }
            Sample::new(Array2::from_shape_vec((spec.n, spec.d), data).expect("shape matches"))
        }
        AlternativeKind::OutlierInjected { magnitude } => {
            let mut data = standard_normal_sample(rng, spec.n, spec.d).into_data();
            for k in 0..spec.d {
                data[[0, k]] = *magnitude;
            }
            Sample::new(data)
        }
        AlternativeKind::External { data, .. } => {
            let rows = data.nrows();
            if rows < spec.n {
                return Err(Error::NotEnoughRows { rows, n: spec.n });
            }
            // partial Fisher-Yates: first n entries are a without-replacement draw
            let mut idx: Vec<usize> = (0..rows).collect();
            for i in 0..spec.n {
                let j = rng.random_range(i..rows);
                idx.swap(i, j);
            }
            let mut out = Array2::zeros((spec.n, spec.d));
            for (r, &src) in idx[..spec.n].iter().enumerate() {
                for k in 0..spec.d {
                    out[[r, k]] = data[[src, k]];
                }
            }
            Sample::new(out)
        }
    }
}

/// MMD estimation method compared in the discrimination experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AnalyticRbf,
    EmpiricalRbf,
    EmpiricalImq,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::AnalyticRbf => "analytic_rbf",
            Method::EmpiricalRbf => "empirical_rbf",
            Method::EmpiricalImq => "empirical_imq",
        }
    }

    pub fn all() -> [Method; 3] {
        [Method::AnalyticRbf, Method::EmpiricalRbf, Method::EmpiricalImq]
    }

    /// The estimator backing this method.
    pub fn estimator_kind(&self) -> EstimatorKind {
        match self {
            Method::AnalyticRbf => EstimatorKind::ClosedFormUnbiased,
            Method::EmpiricalRbf => EstimatorKind::EmpiricalUnbiasedRbf,
            Method::EmpiricalImq => EstimatorKind::EmpiricalUnbiasedImq,
        }
    }

    /// Default scale grid for this method in the discrimination benchmarks.
    pub fn scale_grid(&self) -> Vec<ScaleChoice> {
        match self {
            Method::AnalyticRbf | Method::EmpiricalRbf => rbf_scale_grid(),
            Method::EmpiricalImq => imq_scale_grid(),
        }
    }

    fn kernel(&self, gamma: f64) -> Result<KernelSpec> {
        match self {
            Method::AnalyticRbf | Method::EmpiricalRbf => KernelSpec::rbf(gamma),
            Method::EmpiricalImq => KernelSpec::imq(gamma),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "analytic_rbf" | "analytic" => Ok(Method::AnalyticRbf),
            "empirical_rbf" => Ok(Method::EmpiricalRbf),
            "empirical_imq" => Ok(Method::EmpiricalImq),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Effect size of one method at one (d, s) cell, with the group moments
/// behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct TauResult {
    pub method: Method,
    pub d: usize,
    pub n: usize,
    pub scale: ScaleChoice,
    pub gamma: f64,
    pub tau: f64,
    pub mean_null: f64,
    pub sd_null: f64,
    pub mean_alt: f64,
    pub sd_alt: f64,
    pub replicates: usize,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// One replicate of the discrimination experiment: statistic on a null batch,
/// statistic on an alternative batch. Empirical methods draw a fresh
/// reference sample from N_d for each estimate.
fn tau_replicate(
    method: Method,
    alternative: &AlternativeSpec,
    kernel: &KernelSpec,
    seed: u64,
    index: usize,
) -> Result<(f64, f64)> {
    let (n, d) = (alternative.n, alternative.d);
    let mut rng = substream(seed, index as u64);
    let estimate = |sample: &Sample, rng: &mut rand_chacha::ChaCha8Rng| -> Result<f64> {
        match method {
            Method::AnalyticRbf => smmd(sample, kernel.gamma()),
            Method::EmpiricalRbf | Method::EmpiricalImq => {
                let reference = standard_normal_sample(rng, n, d);
                mmd_u_empirical(sample, &reference, kernel)
            }
        }
    };
    let null_batch = standard_normal_sample(&mut rng, n, d);
    let v_null = estimate(&null_batch, &mut rng)?;
    let alt_batch = sample_alternative(alternative, &mut rng)?;
    let v_alt = estimate(&alt_batch, &mut rng)?;
    Ok((v_null, v_alt))
}

/// Cohen's-d style discrimination power
/// τ = |Mean₁ - Mean₂| / ((SD₁ + SD₂)/2) between the statistic's values on
/// null batches (group 1) and alternative batches (group 2).
pub fn tau(
    method: Method,
    alternative: &AlternativeSpec,
    scale: ScaleChoice,
    replicates: usize,
    seed: u64,
) -> Result<TauResult> {
    if replicates < 2 {
        return Err(Error::TooFewReplicates {
            min: 2,
            got: replicates,
        });
    }
    let gamma = scale.gamma(alternative.d, alternative.n)?;
    let kernel = method.kernel(gamma)?;
    let pairs: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|i| tau_replicate(method, alternative, &kernel, seed, i))
        .collect::<Result<_>>()?;
    let nulls: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let alts: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (mean_null, sd_null) = mean_sd(&nulls);
    let (mean_alt, sd_alt) = mean_sd(&alts);
    Ok(TauResult {
        method,
        d: alternative.d,
        n: alternative.n,
        scale,
        gamma,
        tau: (mean_null - mean_alt).abs() / ((sd_null + sd_alt) / 2.0),
        mean_null,
        sd_null,
        mean_alt,
        sd_alt,
        replicates,
    })
}

/// Empirical mean and sd of SMMD² under the null for one (d, s) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidateRow {
    pub d: usize,
    pub n: usize,
    pub scale: ScaleChoice,
    pub s: f64,
    pub gamma: f64,
    pub mean: f64,
    pub sd: f64,
    pub replicates: usize,
}

/// Verifies the standardization: per scale, the empirical mean and sd of
/// SMMD² over `replicates` null samples. Scale cell i uses seed
/// derive_seed(seed, i).
pub fn validate_null(
    d: usize,
    scales: &[ScaleChoice],
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<ValidateRow>> {
    if replicates < 1000 {
        return Err(Error::TooFewReplicates {
            min: 1000,
            got: replicates,
        });
    }
    scales
        .iter()
        .enumerate()
        .map(|(i, &scale)| {
            let gamma = scale.gamma(d, n)?;
            let spec = NullSpec::new(
                d,
                n,
                KernelSpec::rbf(gamma)?,
                SampleType::Original,
                replicates,
                derive_seed(seed, i as u64),
            )?;
            let dist = crate::testing::simulate_null(&spec)?;
            Ok(ValidateRow {
                d,
                n,
                scale,
                s: gamma_to_scale(gamma, d),
                gamma,
                mean: dist.mean(),
                sd: dist.sd(),
                replicates,
            })
        })
        .collect()
}

/// One cell of the thresholds table.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub d: usize,
    pub n: usize,
    pub sample_type: SampleType,
    pub scale: ScaleChoice,
    pub s: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub replicates: usize,
}

/// Empirical α-level thresholds for every (dimension, sample type, scale)
/// cell. Cell k (in iteration order) uses seed derive_seed(seed, k); when a
/// cache directory is given, cells are loaded from it when present and saved
/// after simulation.
pub fn threshold_table(
    dims: &[usize],
    scales: &[ScaleChoice],
    n: usize,
    alpha: f64,
    replicates: usize,
    seed: u64,
    cache_dir: Option<&Path>,
) -> Result<Vec<ThresholdRow>> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if replicates < 1000 {
        return Err(Error::TooFewReplicates {
            min: 1000,
            got: replicates,
        });
    }
    let sample_types = [
        SampleType::Original,
        SampleType::CenteredScaled,
        SampleType::CenteredWhitened,
    ];
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &d in dims {
        for &sample_type in &sample_types {
            for &scale in scales {
                let gamma = scale.gamma(d, n)?;
                let spec = NullSpec::new(
                    d,
                    n,
                    KernelSpec::rbf(gamma)?,
                    sample_type,
                    replicates,
                    derive_seed(seed, cell),
                )?;
                let dist = load_or_simulate(&spec, cache_dir)?;
                rows.push(ThresholdRow {
                    d,
                    n,
                    sample_type,
                    scale,
                    s: gamma_to_scale(gamma, d),
                    gamma,
                    alpha,
                    threshold: threshold(&dist, alpha)?,
                    replicates,
                });
                cell += 1;
            }
        }
    }
    Ok(rows)
}

/// Outlier-insensitivity experiment: for each method, picks the most
/// discriminative scale against the uniform alternative (maximum τ over the
/// method's grid), then measures τ between clean null batches and null
/// batches with z_1 replaced by magnitude·1.
pub fn outlier_experiment(
    methods: &[Method],
    d: usize,
    n: usize,
    magnitude: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<TauResult>> {
    let uniform = AlternativeSpec::new(AlternativeKind::UniformCube, d, n)?;
    let outlier = AlternativeSpec::new(AlternativeKind::OutlierInjected { magnitude }, d, n)?;
    let mut out = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let grid = method.scale_grid();
        let mut best: Option<TauResult> = None;
        for (si, &scale) in grid.iter().enumerate() {
            let cell_seed = derive_seed(seed, (mi * 1000 + si) as u64);
            let r = tau(method, &uniform, scale, replicates, cell_seed)?;
            if best.as_ref().is_none_or(|b| r.tau > b.tau) {
                best = Some(r);
            }
        }
        let best_scale = best.expect("grid is nonempty").scale;
        let run_seed = derive_seed(seed, (mi * 1000 + 999) as u64);
        out.push(tau(method, &outlier, best_scale, replicates, run_seed)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Machine-readable table output.
// ---------------------------------------------------------------------------

/// 17-significant-digit float formatting shared by all emitted tables.
pub fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_table(header: &str, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn json_table(keys: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let body: Vec<String> = rows
        .map(|row| {
            let fields: Vec<String> = keys
                .iter()
                .zip(row.iter())
                .map(|(k, v)| format!("\"{k}\":{v}"))
                .collect();
            format!("{{{}}}", fields.join(","))
        })
        .collect();
    format!("[{}]", body.join(","))
}

fn tau_cells(r: &TauResult, quoted: bool) -> Vec<String> {
    let q = |s: String| if quoted { format!("\"{s}\"") } else { s };
    vec![
        q(r.method.label().to_string()),
        r.d.to_string(),
        r.n.to_string(),
        q(r.scale.label()),
        g17(r.scale.scale_value(r.d, r.n).expect("scale validated")),
        g17(r.gamma),
        g17(r.tau),
        g17(r.mean_null),
        g17(r.sd_null),
        g17(r.mean_alt),
        g17(r.sd_alt),
        r.replicates.to_string(),
    ]
}

const TAU_KEYS: [&str; 12] = [
    "method", "d", "n", "scale", "s", "gamma", "tau", "mean_null", "sd_null", "mean_alt",
    "sd_alt", "replicates",
];

pub fn tau_table_csv(rows: &[TauResult]) -> String {
    csv_table(&TAU_KEYS.join(","), rows.iter().map(|r| tau_cells(r, false)))
}

pub fn tau_table_json(rows: &[TauResult]) -> String {
    json_table(&TAU_KEYS, rows.iter().map(|r| tau_cells(r, true)))
}

fn validate_cells(r: &ValidateRow, quoted: bool) -> Vec<String> {
    let q = |s: String| if quoted { format!("\"{s}\"") } else { s };
    vec![
        r.d.to_string(),
        r.n.to_string(),
        q(r.scale.label()),
        g17(r.s),
        g17(r.gamma),
        g17(r.mean),
        g17(r.sd),
        r.replicates.to_string(),
    ]
}

const VALIDATE_KEYS: [&str; 8] = ["d", "n", "scale", "s", "gamma", "mean", "sd", "replicates"];

pub fn validate_table_csv(rows: &[ValidateRow]) -> String {
    csv_table(
        &VALIDATE_KEYS.join(","),
        rows.iter().map(|r| validate_cells(r, false)),
    )
}

pub fn validate_table_json(rows: &[ValidateRow]) -> String {
    json_table(&VALIDATE_KEYS, rows.iter().map(|r| validate_cells(r, true)))
}

fn threshold_cells(r: &ThresholdRow, quoted: bool) -> Vec<String> {
    let q = |s: String| if quoted { format!("\"{s}\"") } else { s };
    vec![
        r.d.to_string(),
        r.n.to_string(),
        q(r.sample_type.label().to_string()),
        q(r.scale.label()),
        g17(r.s),
        g17(r.gamma),
        g17(r.alpha),
        g17(r.threshold),
        r.replicates.to_string(),
    ]
}

const THRESHOLD_KEYS: [&str; 9] = [
    "d", "n", "sample_type", "scale", "s", "gamma", "alpha", "threshold", "replicates",
];

pub fn threshold_table_csv(rows: &[ThresholdRow]) -> String {
    csv_table(
        &THRESHOLD_KEYS.join(","),
        rows.iter().map(|r| threshold_cells(r, false)),
    )
}

pub fn threshold_table_json(rows: &[ThresholdRow]) -> String {
    json_table(&THRESHOLD_KEYS, rows.iter().map(|r| threshold_cells(r, true)))
}
