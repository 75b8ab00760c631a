//! Streaming convergence monitors over per-batch SMMD² values.
//!
//! Under the null each per-batch SMMD² has zero mean and unit variance, so
//! the running average B_m = (1/m) Σ_b S_b is asymptotically N(0, 1/m) and
//! the exponential moving average E_b = αE_{b-1} + (1-α)S_b is asymptotically
//! normal with variance bounded by (1-α)/(1+α). Values outside the matching
//! three-sigma interval indicate the code distribution has not converged.

use crate::error::{Error, Result};

/// Batches needed before the B-statistic verdict is considered meaningful.
pub const B_MIN_BATCHES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceFlag {
    Inside,
    Outside,
    InsufficientData,
}

impl ConvergenceFlag {
    pub fn label(&self) -> &'static str {
        match self {
            ConvergenceFlag::Inside => "inside",
            ConvergenceFlag::Outside => "outside",
            ConvergenceFlag::InsufficientData => "insufficient_data",
        }
    }
}

/// Simple running average of per-batch values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BMonitor {
    batches: usize,
    sum: f64,
}

impl BMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, smmd_value: f64) {
        self.batches += 1;
        self.sum += smmd_value;
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    /// B_m = (1/m) Σ S_b; None before the first batch.
    pub fn statistic(&self) -> Option<f64> {
        (self.batches > 0).then(|| self.sum / self.batches as f64)
    }

    pub fn interval(&self) -> Result<(f64, f64)> {
        b_interval(self.batches)
    }

    pub fn flag(&self) -> ConvergenceFlag {
        if self.batches < B_MIN_BATCHES {
            return ConvergenceFlag::InsufficientData;
        }
        let stat = self.statistic().expect("batches >= 30");
        let (lo, hi) = b_interval(self.batches).expect("batches >= 30");
        if stat >= lo && stat <= hi {
            ConvergenceFlag::Inside
        } else {
            ConvergenceFlag::Outside
        }
    }
}

/// Three-sigma interval [-3/√m, 3/√m] for the B-statistic after m batches.
pub fn b_interval(m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::NoBatches);
    }
    let half = 3.0 / (m as f64).sqrt();
    Ok((-half, half))
}

/// Exponential moving average E_b = αE_{b-1} + (1-α)S_b with E_0 = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EMonitor {
    alpha: f64,
    value: f64,
    steps: usize,
}

impl EMonitor {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidMomentum(alpha));
        }
        Ok(Self {
            alpha,
            value: 0.0,
            steps: 0,
        })
    }

    pub fn update(&mut self, smmd_value: f64) {
        self.value = self.alpha * self.value + (1.0 - self.alpha) * smmd_value;
        self.steps += 1;
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Current E_b (0 before any update).
    pub fn statistic(&self) -> f64 {
        self.value
    }

    pub fn interval(&self) -> (f64, f64) {
        e_interval(self.alpha).expect("alpha validated at construction")
    }

    pub fn flag(&self) -> ConvergenceFlag {
        let (lo, hi) = self.interval();
        if self.value >= lo && self.value <= hi {
            ConvergenceFlag::Inside
        } else {
            ConvergenceFlag::Outside
        }
    }
}

/// Three-sigma interval ±3√((1-α)/(1+α)) for the E-statistic; the variance
/// bound drops the (1-α^{2m+2}) factor, so the interval is slightly liberal.
pub fn e_interval(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidMomentum(alpha));
    }
    let half = 3.0 * ((1.0 - alpha) / (1.0 + alpha)).sqrt();
    Ok((-half, half))
}
