use super::regression::linear_regression;
use crate::error::{ensure, Error, Result};
use crate::series::AllanSeries;

pub const MIN_SAMPLES: usize = 32;

/// Overlapping Allan deviation of a rate series sampled every `tau0`, at
/// octave-spaced averaging times `m tau0` with `m <= N / 4`.
pub fn allan_deviation(values: &[f64], tau0: f64) -> Result<AllanSeries> {
    ensure(tau0 > 0.0, "tau0", "must be > 0")?;
    let n = values.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooShort {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    // integrated phase, in units of tau0
    let mut phase = Vec::with_capacity(n + 1);
    phase.push(0.0);
    let mut acc = 0.0;
    for v in values {
        acc += v;
        phase.push(acc);
    }
    let mut out = AllanSeries {
        tau_avg: Vec::new(),
        adev: Vec::new(),
        n_terms: Vec::new(),
    };
    let mut m = 1;
    while m <= n / 4 {
        let terms = n + 1 - 2 * m;
        let sum: f64 = (0..terms)
            .map(|i| {
                let d = phase[i + 2 * m] - 2.0 * phase[i + m] + phase[i];
                d * d
            })
            .sum();
        let mf = m as f64;
        out.tau_avg.push(mf * tau0);
        out.adev.push((sum / (2.0 * mf * mf * terms as f64)).sqrt());
        out.n_terms.push(terms);
        m *= 2;
    }
    Ok(out)
}

/// Log-log slope of the Allan deviation over averaging times up to `max_tau`.
pub fn log_log_slope(series: &AllanSeries, max_tau: f64) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = series
        .tau_avg
        .iter()
        .zip(&series.adev)
        .filter(|(t, a)| **t <= max_tau && **a > 0.0)
        .map(|(t, a)| (t.ln(), a.ln()))
        .unzip();
    Ok(linear_regression(&x, &y)?.slope)
}

/// White-noise density `adev(tau) sqrt(tau)` averaged over `tau <= max_tau`
/// (units of the series per sqrt(Hz)).
pub fn white_noise_density(series: &AllanSeries, max_tau: f64) -> Option<f64> {
    let vals: Vec<f64> = series
        .tau_avg
        .iter()
        .zip(&series.adev)
        .filter(|(t, _)| **t <= max_tau)
        .map(|(t, a)| a * t.sqrt())
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Minimum of the Allan deviation and its averaging time.
pub fn bias_stability(series: &AllanSeries) -> Option<(f64, f64)> {
    series
        .tau_avg
        .iter()
        .zip(&series.adev)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(t, a)| (*t, *a))
}
