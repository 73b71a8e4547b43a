use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::FringeSeries;

/// Relative step deviation tolerated before a grid counts as non-uniform.
const UNIFORM_TOLERANCE: f64 = 1e-6;

/// One-sided power spectrum. `power[k]` is `|X_k / n|^2`, so a sinusoid of
/// amplitude `a` peaks near `a^2 / 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    /// Resolution of the unpadded transform, `1 / (n dt)` (Hz).
    pub resolution: f64,
}

impl Spectrum {
    fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.freqs.partition_point(|&f| f < lo);
        let b = self.freqs.partition_point(|&f| f <= hi);
        a..b.max(a)
    }

    /// Highest non-DC bin at or above `min_freq`, as `(frequency, power)`.
    pub fn peak(&self, min_freq: f64) -> Option<(f64, f64)> {
        let start = self.index_range(min_freq, f64::INFINITY).start.max(1);
        (start..self.power.len())
            .max_by(|&a, &b| self.power[a].total_cmp(&self.power[b]))
            .map(|k| (self.freqs[k], self.power[k]))
    }

    /// Peak frequency refined by a parabola through the three bins around the maximum.
    pub fn refined_peak(&self, min_freq: f64) -> Option<f64> {
        let (f, _) = self.peak(min_freq)?;
        let k = self.freqs.partition_point(|&x| x < f);
        if k == 0 || k + 1 >= self.power.len() {
            return Some(f);
        }
        let (a, b, c) = (self.power[k - 1], self.power[k], self.power[k + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        let df = self.freqs[1] - self.freqs[0];
        Some(f + shift.clamp(-0.5, 0.5) * df)
    }

    /// Largest power within `center +- half_width`.
    pub fn max_in_band(&self, center: f64, half_width: f64) -> f64 {
        self.power[self.index_range(center - half_width, center + half_width)]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// Median power outside the listed `(center, half_width)` bands and DC.
    pub fn noise_floor(&self, exclude: &[(f64, f64)]) -> f64 {
        let mut kept: Vec<f64> = self
            .freqs
            .iter()
            .zip(&self.power)
            .skip(1)
            .filter(|(f, _)| exclude.iter().all(|(c, w)| (*f - c).abs() > *w))
            .map(|(_, p)| *p)
            .collect();
        if kept.is_empty() {
            return 0.0;
        }
        let mid = kept.len() / 2;
        *kept.select_nth_unstable_by(mid, f64::total_cmp).1
    }
}

/// Sample spacing of a uniform grid.
pub fn uniform_step(taus: &[f64]) -> Result<f64> {
    if taus.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: taus.len(),
        });
    }
    let dt = (taus[taus.len() - 1] - taus[0]) / (taus.len() - 1) as f64;
    for (i, w) in taus.windows(2).enumerate() {
        let deviation = ((w[1] - w[0]) - dt).abs() / dt;
        if !(deviation <= UNIFORM_TOLERANCE) {
            return Err(Error::NonUniformGrid {
                index: i,
                deviation,
            });
        }
    }
    Ok(dt)
}

/// Squared magnitude of the discrete Fourier transform of a uniformly sampled
/// series, mean removed, zero-padded to `zero_pad` times its length.
pub fn power_spectrum(series: &FringeSeries, zero_pad: usize) -> Result<Spectrum> {
    series.validate()?;
    let dt = uniform_step(&series.taus)?;
    let n = series.len();
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let padded = n * zero_pad.max(1);
    let mut buf: Vec<Complex64> = series
        .values
        .iter()
        .map(|v| Complex64::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(padded)
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let scale = 1.0 / (n as f64 * n as f64);
    let half = padded / 2 + 1;
    Ok(Spectrum {
        freqs: (0..half).map(|k| k as f64 / (padded as f64 * dt)).collect(),
        power: buf[..half].iter().map(|z| z.norm_sqr() * scale).collect(),
        resolution: 1.0 / (n as f64 * dt),
    })
}
