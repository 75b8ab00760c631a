//! Monte-Carlo null distributions of SMMD² and the normality-test pipeline.
//!
//! For the simple null (is the sample N(0, I)?) replicates are raw draws from
//! N_d. For composite nulls the nuisance parameters are estimated from the
//! sample itself, which introduces dependencies (zero mean, identity sample
//! covariance); replicates must be passed through the same transform —
//! centering+scaling for a diagonal covariance hypothesis, centering+whitening
//! for a full covariance — or the resulting test is liberal. Thresholds come
//! from the empirical (1-α) quantile of the replicate values.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{mmd_u_closed, null_variance};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::normalization::{center_scale, center_whiten};
use crate::rng::{standard_normal_sample, substream};
use crate::sample::Sample;

/// Minimum replicate count accepted when a distribution backs a test.
pub const MIN_REPLICATES_FOR_TEST: usize = 1000;

/// Per-replicate redraw cap; a healthy configuration redraws almost never.
const MAX_REDRAWS_PER_REPLICATE: usize = 1000;

/// Transform applied to each Monte-Carlo replicate before the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleType {
    Original,
    CenteredScaled,
    CenteredWhitened,
}

impl SampleType {
    pub fn label(&self) -> &'static str {
        match self {
            SampleType::Original => "original",
            SampleType::CenteredScaled => "centered_scaled",
            SampleType::CenteredWhitened => "centered_whitened",
        }
    }
}

/// The composite structure of the null hypothesis under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositeNull {
    /// H0: X ~ N(0, I) with everything known.
    SimpleStandard,
    /// H0: X ~ N(μ, Σ) with Σ diagonal, both unknown.
    DiagonalCov,
    /// H0: X ~ N(μ, Σ) with full non-degenerate Σ, both unknown.
    FullCov,
}

impl CompositeNull {
    /// The replicate transform whose null distribution is valid for this test.
    pub fn sample_type(&self) -> SampleType {
        match self {
            CompositeNull::SimpleStandard => SampleType::Original,
            CompositeNull::DiagonalCov => SampleType::CenteredScaled,
            CompositeNull::FullCov => SampleType::CenteredWhitened,
        }
    }
}

/// Identifies one Monte-Carlo null distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpec {
    pub d: usize,
    pub n: usize,
    pub kernel: KernelSpec,
    pub sample_type: SampleType,
    pub replicates: usize,
    pub seed: u64,
}

impl NullSpec {
    pub fn new(
        d: usize,
        n: usize,
        kernel: KernelSpec,
        sample_type: SampleType,
        replicates: usize,
        seed: u64,
    ) -> Result<Self> {
        if kernel.family() != KernelFamily::Rbf {
            return Err(Error::UnsupportedKernel);
        }
        if n < 2 {
            return Err(Error::SampleTooSmall(n));
        }
        if sample_type == SampleType::CenteredWhitened && n < d + 1 {
            return Err(Error::TooFewPointsForWhitening { n, d });
        }
        if replicates == 0 {
            return Err(Error::TooFewReplicates {
                min: 1,
                got: replicates,
            });
        }
        Ok(Self {
            d,
            n,
            kernel,
            sample_type,
            replicates,
            seed,
        })
    }

    fn describe(&self) -> String {
        format!(
            "d={} n={} family={} gamma={} sample_type={} replicates={} seed={}",
            self.d,
            self.n,
            self.kernel.family().label(),
            self.kernel.gamma(),
            self.sample_type.label(),
            self.replicates,
            self.seed
        )
    }

    /// True when `other` can stand in for this spec statistically: everything
    /// but the Monte-Carlo run identity (replicates, seed) matches.
    pub fn same_statistic(&self, other: &NullSpec) -> bool {
        self.d == other.d
            && self.n == other.n
            && self.kernel == other.kernel
            && self.sample_type == other.sample_type
    }
}

/// Sorted replicate values of SMMD² under a given null spec.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    spec: NullSpec,
    values: Vec<f64>,
}

impl NullDistribution {
    pub fn from_values(spec: NullSpec, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.replicates {
            return Err(Error::SpecMismatch {
                need: format!("{} replicate values", spec.replicates),
                have: format!("{}", values.len()),
            });
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &NullSpec {
        &self.spec
    }

    /// Replicate values, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Unbiased standard deviation of the replicate values.
    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (self.values.len() - 1) as f64).sqrt()
    }
}

fn transformed_statistic(sample: &Sample, sample_type: SampleType, gamma: f64, sqrt_var: f64) -> Result<f64> {
    let value = match sample_type {
        SampleType::Original => mmd_u_closed(sample, gamma)?,
        SampleType::CenteredScaled => mmd_u_closed(&center_scale(sample)?, gamma)?,
        SampleType::CenteredWhitened => mmd_u_closed(&center_whiten(sample)?, gamma)?,
    };
    Ok(value / sqrt_var)
}

/// One replicate: draw from stream `index`, transform, standardize. Redraws
/// from the same stream when the transform degenerates, reporting how often.
fn replicate(spec: &NullSpec, index: usize, sqrt_var: f64) -> Result<(f64, usize)> {
    let mut rng = substream(spec.seed, index as u64);
    let gamma = spec.kernel.gamma();
    let mut redraws = 0;
    loop {
        let sample = standard_normal_sample(&mut rng, spec.n, spec.d);
        match transformed_statistic(&sample, spec.sample_type, gamma, sqrt_var) {
            Ok(v) => return Ok((v, redraws)),
            Err(Error::SingularCovariance { .. }) | Err(Error::ZeroVariance(_)) => {
                redraws += 1;
                if redraws > MAX_REDRAWS_PER_REPLICATE {
                    return Err(Error::TooManyRedraws {
                        redraws,
                        replicates: 1,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Simulates the null distribution of SMMD² for `spec`.
///
/// Replicates run in parallel; replicate i always consumes substream i of the
/// root seed and results are reduced in index order, so output is bit-exact
/// regardless of thread count.
pub fn simulate_null(spec: &NullSpec) -> Result<NullDistribution> {
    let sqrt_var = null_variance(spec.kernel.gamma(), spec.d, spec.n)?.sqrt();
    let outcomes: Vec<(f64, usize)> = (0..spec.replicates)
        .into_par_iter()
        .map(|i| replicate(spec, i, sqrt_var))
        .collect::<Result<_>>()?;
    let redraws: usize = outcomes.iter().map(|(_, r)| r).sum();
    if redraws * 100 > spec.replicates {
        return Err(Error::TooManyRedraws {
            redraws,
            replicates: spec.replicates,
        });
    }
    let values: Vec<f64> = outcomes.into_iter().map(|(v, _)| v).collect();
    NullDistribution::from_values(spec.clone(), values)
}

/// Empirical quantile at 1-α with linear interpolation between order
/// statistics: h = (len-1)(1-α), threshold = v[⌊h⌋] + (h-⌊h⌋)(v[⌊h⌋+1]-v[⌊h⌋]).
pub fn threshold(dist: &NullDistribution, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let v = dist.values();
    let h = (v.len() - 1) as f64 * (1.0 - alpha);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= v.len() {
        return Ok(v[v.len() - 1]);
    }
    Ok(v[lo] + frac * (v[lo + 1] - v[lo]))
}

/// Outcome of a normality test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
}

/// Tests the sample against the requested null at level α using a simulated
/// null distribution.
///
/// The cached distribution must match the sample's (d, n), the kernel, and
/// the sample type implied by the composite structure; mixing e.g. Original
/// thresholds with a composite hypothesis is rejected rather than silently
/// producing a liberal test.
pub fn test_normality(
    sample: &Sample,
    kernel: &KernelSpec,
    composite: CompositeNull,
    alpha: f64,
    null_cache: &NullDistribution,
) -> Result<TestResult> {
    let required = NullSpec::new(
        sample.dim(),
        sample.n(),
        *kernel,
        composite.sample_type(),
        null_cache.spec().replicates,
        null_cache.spec().seed,
    )?;
    if !required.same_statistic(null_cache.spec()) {
        return Err(Error::SpecMismatch {
            need: required.describe(),
            have: null_cache.spec().describe(),
        });
    }
    if null_cache.spec().replicates < MIN_REPLICATES_FOR_TEST {
        return Err(Error::TooFewReplicates {
            min: MIN_REPLICATES_FOR_TEST,
            got: null_cache.spec().replicates,
        });
    }
    let sqrt_var = null_variance(kernel.gamma(), sample.dim(), sample.n())?.sqrt();
    let statistic = transformed_statistic(sample, composite.sample_type(), kernel.gamma(), sqrt_var)?;
    let thresh = threshold(null_cache, alpha)?;
    Ok(TestResult {
        statistic,
        threshold: thresh,
        reject: statistic > thresh,
    })
}

// ---------------------------------------------------------------------------
// Disk cache: one file per NullSpec, a JSON header line followed by one
// replicate value per line. Values use the shortest round-trip decimal form,
// so a re-read reproduces thresholds bit-exactly.
// ---------------------------------------------------------------------------

const CACHE_VERSION: &str = env!("CARGO_PKG_VERSION");
const CACHE_EXT: &str = "ndist";

#[derive(Debug, Serialize, Deserialize)]
struct CacheHeader {
    version: String,
    d: usize,
    n: usize,
    family: KernelFamily,
    gamma: f64,
    gamma_bits: String,
    sample_type: SampleType,
    replicates: usize,
    seed: u64,
}

impl CacheHeader {
    fn for_spec(spec: &NullSpec) -> Self {
        Self {
            version: CACHE_VERSION.to_string(),
            d: spec.d,
            n: spec.n,
            family: spec.kernel.family(),
            gamma: spec.kernel.gamma(),
            gamma_bits: format!("{:016x}", spec.kernel.gamma().to_bits()),
            sample_type: spec.sample_type,
            replicates: spec.replicates,
            seed: spec.seed,
        }
    }

    fn to_spec(&self) -> Result<NullSpec> {
        let bits = u64::from_str_radix(&self.gamma_bits, 16)
            .map_err(|e| Error::CorruptCache(format!("bad gamma_bits: {e}")))?;
        let kernel = KernelSpec::new(self.family, f64::from_bits(bits))?;
        NullSpec::new(
            self.d,
            self.n,
            kernel,
            self.sample_type,
            self.replicates,
            self.seed,
        )
    }
}

/// Canonical content hash of a NullSpec; stable across runs and platforms.
pub fn cache_key(spec: &NullSpec) -> String {
    let canonical = format!(
        "smmd-null-v1|d={}|n={}|family={}|gamma_bits={:016x}|sample_type={}|replicates={}|seed={}",
        spec.d,
        spec.n,
        spec.kernel.family().label(),
        spec.kernel.gamma().to_bits(),
        spec.sample_type.label(),
        spec.replicates,
        spec.seed,
    );
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// File name a distribution for `spec` is stored under.
pub fn cache_file_name(spec: &NullSpec) -> String {
    format!(
        "null-d{}-n{}-{}-{}-{}.{}",
        spec.d,
        spec.n,
        spec.kernel.family().label(),
        spec.sample_type.label(),
        &cache_key(spec)[..16],
        CACHE_EXT,
    )
}

/// Writes the distribution to `dir`, returning the file path.
pub fn save_distribution(dist: &NullDistribution, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(cache_file_name(dist.spec()));
    let header = serde_json::to_string(&CacheHeader::for_spec(dist.spec()))
        .expect("header serialization cannot fail");
    let mut out = String::with_capacity(header.len() + dist.values().len() * 20);
    out.push_str(&header);
    out.push('\n');
    for v in dist.values() {
        out.push_str(&format!("{v}"));
        out.push('\n');
    }
    let mut file = fs::File::create(&path)?;
    file.write_all(out.as_bytes())?;
    Ok(path)
}

fn read_distribution(path: &Path) -> Result<NullDistribution> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::CorruptCache("empty file".into()))??;
    let header: CacheHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::CorruptCache(format!("bad header: {e}")))?;
    let spec = header.to_spec()?;
    let mut values = Vec::with_capacity(spec.replicates);
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| Error::CorruptCache(format!("bad value {line:?}: {e}")))?;
        values.push(v);
    }
    NullDistribution::from_values(spec, values)
}

/// Loads the exact distribution for `spec` from `dir`, if present.
pub fn load_distribution(dir: &Path, spec: &NullSpec) -> Result<Option<NullDistribution>> {
    let path = dir.join(cache_file_name(spec));
    if !path.exists() {
        return Ok(None);
    }
    let dist = read_distribution(&path)?;
    if dist.spec() != spec {
        return Err(Error::SpecMismatch {
            need: spec.describe(),
            have: dist.spec().describe(),
        });
    }
    Ok(Some(dist))
}

/// Loads from cache when possible, otherwise simulates (and saves when a
/// cache directory is given).
pub fn load_or_simulate(spec: &NullSpec, dir: Option<&Path>) -> Result<NullDistribution> {
    if let Some(dir) = dir {
        if let Some(dist) = load_distribution(dir, spec)? {
            return Ok(dist);
        }
    }
    let dist = simulate_null(spec)?;
    if let Some(dir) = dir {
        save_distribution(&dist, dir)?;
    }
    Ok(dist)
}

/// Scans `dir` for any cached distribution matching the statistical identity
/// (d, n, kernel, sample type) with at least `min_replicates` values, and
/// returns the one with the most replicates.
pub fn find_cached(
    dir: &Path,
    d: usize,
    n: usize,
    kernel: &KernelSpec,
    sample_type: SampleType,
    min_replicates: usize,
) -> Result<Option<NullDistribution>> {
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == CACHE_EXT))
        .collect();
    entries.sort();

    let mut best: Option<NullDistribution> = None;
    for path in entries {
        let Ok(dist) = read_distribution(&path) else {
            continue;
        };
        let s = dist.spec();
        if s.d == d
            && s.n == n
            && s.kernel == *kernel
            && s.sample_type == sample_type
            && s.replicates >= min_replicates
            && best.as_ref().is_none_or(|b| s.replicates > b.spec().replicates)
        {
            best = Some(dist);
        }
    }
    Ok(best)
}
