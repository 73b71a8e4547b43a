use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Candidate free-precession delays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkingPoint {
    /// Maximizes the per-shot slope `tau exp(-tau / T2*)`; equals T2*.
    pub per_shot_optimum: f64,
    /// Maximizes `tau exp(-tau / T2*) / sqrt(tau + overhead)`, the slope per
    /// unit noise at fixed total measurement time.
    pub time_optimum: f64,
    /// Cosine null of the fringe nearest to `time_optimum`.
    pub snapped: f64,
    /// `|cos(2 pi f snapped)|`.
    pub cosine_residual: f64,
}

/// Sensitivity figure of merit at fixed averaging time.
pub fn figure_of_merit(tau: f64, t2star: f64, overhead: f64) -> f64 {
    tau * (-tau / t2star).exp() / (tau + overhead).sqrt()
}

/// Stationary point of [`figure_of_merit`]: the positive root of
/// `2 tau^2 - (T - 2 o) tau - 2 T o = 0`.
pub fn time_optimal_delay(t2star: f64, overhead: f64) -> f64 {
    let b = t2star - 2.0 * overhead;
    (b + (b * b + 16.0 * t2star * overhead).sqrt()) / 4.0
}

/// Delay `(k + 1/2) / (2 f)` nearest to `tau`.
pub fn snap_to_cosine_null(tau: f64, fringe_freq: f64) -> f64 {
    let f = fringe_freq.abs();
    let k = (2.0 * f * tau - 0.5).round().max(0.0);
    (k + 0.5) / (2.0 * f)
}

pub fn select_working_point(t2star: f64, fringe_freq: f64, overhead: f64) -> Result<WorkingPoint> {
    ensure(t2star > 0.0, "T2star", "must be > 0")?;
    ensure(fringe_freq.abs() > 0.0 && fringe_freq.is_finite(), "fringe_freq", "must be nonzero")?;
    ensure(overhead >= 0.0, "overhead", "must be >= 0")?;
    let time_optimum = time_optimal_delay(t2star, overhead);
    let snapped = snap_to_cosine_null(time_optimum, fringe_freq);
    Ok(WorkingPoint {
        per_shot_optimum: t2star,
        time_optimum,
        snapped,
        cosine_residual: (2.0 * PI * fringe_freq * snapped).cos().abs(),
    })
}
