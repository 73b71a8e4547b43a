//! Data series passed between the simulator and the analysis routines.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// `(tau, signal)` fringe scan with optional per-point noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeSeries {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl FringeSeries {
    pub fn new(taus: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let s = Self {
            taus,
            values,
            sigma: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        ensure(sigma.len() == self.taus.len(), "sigma", "length differs from taus")?;
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.taus.len() == self.values.len(),
            "values",
            "length differs from taus",
        )?;
        ensure(
            self.taus.windows(2).all(|w| w[1] > w[0]),
            "taus",
            "must be strictly increasing",
        )
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Metadata carried by a working-point stream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub tau_wp: f64,
    pub cycle_period: f64,
    pub seed: Option<u64>,
    /// Calibration used for `nu_hat`, fractional signal per Hz.
    pub alpha_per_hz: Option<f64>,
    pub baseline: Option<f64>,
}

/// Working-point stream: one combined 4-Ramsey signal per cycle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GyroTimeSeries {
    /// Cycle start times (s).
    pub t: Vec<f64>,
    /// Combined signal (fractional fluorescence).
    pub signal: Vec<f64>,
    /// Rotation rate applied during each cycle (Hz).
    pub reference_rate_hz: Vec<f64>,
    /// Calibrated rotation estimate (Hz); empty until calibrated.
    pub nu_hat_hz: Vec<f64>,
    /// Shot-noise standard deviation of one combined sample.
    pub sigma: f64,
    pub meta: StreamMeta,
}

impl GyroTimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Overlapping Allan deviation versus averaging time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllanSeries {
    pub tau_avg: Vec<f64>,
    pub adev: Vec<f64>,
    /// Number of second-difference terms behind each point.
    pub n_terms: Vec<usize>,
}

impl AllanSeries {
    pub fn len(&self) -> usize {
        self.tau_avg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_avg.is_empty()
    }

    /// Log-log interpolation at `tau` (clamped to the covered range).
    pub fn interpolate(&self, tau: f64) -> Option<f64> {
        let n = self.len();
        if n == 0 {
            return None;
        }
        if tau <= self.tau_avg[0] {
            return Some(self.adev[0]);
        }
        if tau >= self.tau_avg[n - 1] {
            return Some(self.adev[n - 1]);
        }
        let i = self.tau_avg.partition_point(|&t| t <= tau) - 1;
        let (t0, t1) = (self.tau_avg[i].ln(), self.tau_avg[i + 1].ln());
        let (a0, a1) = (self.adev[i].ln(), self.adev[i + 1].ln());
        let w = (tau.ln() - t0) / (t1 - t0);
        Some((a0 + w * (a1 - a0)).exp())
    }
}
