use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::regression::linear_regression;
use super::spectrum::power_spectrum;
use crate::error::{Error, Result};
use crate::series::FringeSeries;

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-10;

type Vec5 = SVector<f64, 5>;
type Mat5 = SMatrix<f64, 5, 5>;

/// Damped sinusoid `A exp(-tau / T2*) sin(2 pi f tau + phi) + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub t2star: f64,
    pub offset: f64,
    /// Covariance in the order amplitude, frequency, phase, t2star, offset.
    pub covariance: [[f64; 5]; 5],
    pub residual_rms: f64,
    pub iterations: usize,
}

impl FringeFit {
    pub const PARAMETER_NAMES: [&'static str; 5] = ["amplitude", "frequency", "phase", "t2star", "offset"];

    pub fn std_errors(&self) -> [f64; 5] {
        std::array::from_fn(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn envelope(&self, tau: f64) -> f64 {
        self.amplitude * (-tau / self.t2star).exp()
    }

    pub fn evaluate(&self, tau: f64) -> f64 {
        self.envelope(tau) * (2.0 * PI * self.frequency * tau + self.phase).sin() + self.offset
    }
}

/// Internal parameters `[A, f, phi, decay rate, offset]`.
fn model(p: &Vec5, t: f64) -> (f64, Vec5) {
    let env = (-p[3] * t).exp();
    let (s, c) = (2.0 * PI * p[1] * t + p[2]).sin_cos();
    let value = p[0] * env * s + p[4];
    let grad = Vec5::new(env * s, p[0] * env * c * 2.0 * PI * t, p[0] * env * c, -t * p[0] * env * s, 1.0);
    (value, grad)
}

struct Problem<'a> {
    t: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
}

impl Problem<'_> {
    fn cost(&self, p: &Vec5) -> f64 {
        self.t
            .iter()
            .zip(self.y)
            .zip(&self.w)
            .map(|((&t, &y), &w)| {
                let r = (y - model(p, t).0) * w;
                r * r
            })
            .sum()
    }

    /// Normal matrix and gradient of the weighted least-squares problem.
    fn normal(&self, p: &Vec5) -> (Mat5, Vec5, f64) {
        let mut jtj = Mat5::zeros();
        let mut jtr = Vec5::zeros();
        let mut cost = 0.0;
        for ((&t, &y), &w) in self.t.iter().zip(self.y).zip(&self.w) {
            let (m, g) = model(p, t);
            let g = g * w;
            let r = (y - m) * w;
            jtj += g * g.transpose();
            jtr += g * r;
            cost += r * r;
        }
        (jtj, jtr, cost)
    }
}

/// Least-squares amplitudes of `basis` columns against `y`.
fn linear_lstsq(columns: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let n = y.len();
    let a = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let b = DVector::from_column_slice(y);
    a.svd(true, true).solve(&b, 1e-14).ok().map(|x| x.iter().copied().collect())
}

/// Sine/cosine/offset amplitudes at a fixed frequency and decay rate.
fn quadrature(t: &[f64], y: &[f64], f: f64, decay: f64) -> Option<(f64, f64, f64)> {
    let env: Vec<f64> = t.iter().map(|&t| (-decay * t).exp()).collect();
    let sin = t.iter().zip(&env).map(|(&t, e)| e * (2.0 * PI * f * t).sin()).collect();
    let cos = t.iter().zip(&env).map(|(&t, e)| e * (2.0 * PI * f * t).cos()).collect();
    let x = linear_lstsq(&[sin, cos, vec![1.0; t.len()]], y)?;
    Some((x[0], x[1], x[2]))
}

/// Decay rate from a log-linear fit of per-segment oscillation amplitudes.
fn envelope_decay(t: &[f64], y: &[f64], f: f64) -> f64 {
    let span = t[t.len() - 1] - t[0];
    let segments = ((span * f / 2.0).floor() as usize).min(8);
    if segments < 2 {
        return 0.0;
    }
    let len = t.len() / segments;
    let (mut centers, mut logs) = (Vec::new(), Vec::new());
    for k in 0..segments {
        let range = k * len..if k + 1 == segments { t.len() } else { (k + 1) * len };
        if range.len() < 4 {
            continue;
        }
        if let Some((a, b, _)) = quadrature(&t[range.clone()], &y[range.clone()], f, 0.0) {
            let amp = a.hypot(b);
            if amp > 0.0 {
                centers.push(0.5 * (t[range.start] + t[range.end - 1]));
                logs.push(amp.ln());
            }
        }
    }
    match linear_regression(&centers, &logs) {
        Ok(line) if line.slope < 0.0 => -line.slope,
        _ => 0.0,
    }
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Nonlinear least-squares fit of a damped sinusoid with free offset.
///
/// Starts from the zero-padded spectrum peak, a log-linear envelope fit and a
/// quadrature projection, then refines with Levenberg-Marquardt. Per-point
/// `sigma`, when present, weights the residuals. The covariance is scaled by
/// the reduced chi-square.
pub fn fit_decaying_sine(series: &FringeSeries) -> Result<FringeFit> {
    series.validate()?;
    let n = series.len();
    if n < 8 {
        return Err(Error::TooShort { needed: 8, got: n });
    }
    let (t, y) = (&series.taus[..], &series.values[..]);
    let span = t[n - 1] - t[0];
    let spectrum = power_spectrum(series, 4)?;
    let (_, peak_power) = spectrum.peak(0.0).unwrap_or((0.0, 0.0));
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if !(peak_power > (1e-12 * scale).powi(2)) {
        return Err(Error::InsufficientSpan("series has no oscillating component".into()));
    }
    let f0 = spectrum.refined_peak(0.0).unwrap_or(0.0);
    if span * f0 < 1.0 {
        return Err(Error::InsufficientSpan(format!(
            "{span:.3e} s covers {:.2} periods of the {f0:.6e} Hz peak; need at least one",
            span * f0
        )));
    }
    let decay0 = envelope_decay(t, y, f0);
    let (a, b, c) = quadrature(t, y, f0, decay0)
        .ok_or(Error::NonConvergence { iterations: 0 })?;
    let mut p = Vec5::new(a.hypot(b), f0, b.atan2(a), decay0, c);

    let w = match &series.sigma {
        Some(s) => {
            if s.iter().any(|&v| !(v > 0.0)) {
                return Err(crate::error::invalid("sigma", "must be > 0"));
            }
            s.iter().map(|v| 1.0 / v).collect()
        }
        None => vec![1.0; n],
    };
    let problem = Problem { t, y, w };
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    'outer: while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr, cost) = problem.normal(&p);
        loop {
            let mut damped = jtj;
            for i in 0..5 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
            }
            let step = damped.cholesky().map(|ch| ch.solve(&jtr));
            if let Some(step) = step {
                let trial = p + step;
                let trial_cost = problem.cost(&trial);
                if trial_cost.is_finite() && trial_cost <= cost {
                    let typical = Vec5::new(p[0].abs(), p[1].abs(), 1.0, 1.0 / span, p[0].abs());
                    let rel = (0..5)
                        .map(|i| step[i].abs() / p[i].abs().max(typical[i]).max(f64::MIN_POSITIVE))
                        .fold(0.0, f64::max);
                    p = trial;
                    lambda = (lambda / 10.0).max(1e-15);
                    if rel < STEP_TOLERANCE {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no descent direction left: at the minimum to machine precision
                converged = true;
                break 'outer;
            }
        }
    }
    if !converged || !p.iter().all(|v| v.is_finite()) {
        return Err(Error::NonConvergence { iterations });
    }
    if !(p[3] > 0.0) {
        return Err(Error::NonConvergence { iterations });
    }

    let (jtj, _, cost) = problem.normal(&p);
    let dof = (n - 5).max(1) as f64;
    let inv = jtj
        .try_inverse()
        .ok_or(Error::NonConvergence { iterations })?;
    let mut cov = inv * (cost / dof);
    // decay rate -> T2*, and fold a negative amplitude into the phase
    let mut jac = Mat5::identity();
    jac[(3, 3)] = -1.0 / (p[3] * p[3]);
    if p[0] < 0.0 {
        jac[(0, 0)] = -1.0;
        p[0] = -p[0];
        p[2] += PI;
    }
    cov = jac * cov * jac.transpose();
    let cov = 0.5 * (cov + cov.transpose());
    let residual_rms = (t
        .iter()
        .zip(y)
        .map(|(&t, &y)| (y - model(&p, t).0).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(FringeFit {
        amplitude: p[0],
        frequency: p[1],
        phase: wrap_phase(p[2]),
        t2star: 1.0 / p[3],
        offset: p[4],
        covariance: std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)])),
        residual_rms,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::linspace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synth(a: f64, f: f64, phi: f64, t2: f64, c: f64, taus: &[f64]) -> Vec<f64> {
        taus.iter()
            .map(|&t| a * (-t / t2).exp() * (2.0 * PI * f * t + phi).sin() + c)
            .collect()
    }

    #[test]
    fn noiseless_fringe_is_recovered_exactly() {
        let taus = linspace(0.0, 5e-3, 20_001);
        let y = synth(0.0066, 293_332.0, 0.7, 1.95e-3, 1.0, &taus);
        let fit = fit_decaying_sine(&FringeSeries::new(taus, y).unwrap()).unwrap();
        assert!((fit.amplitude / 0.0066 - 1.0).abs() < 1e-6);
        assert!((fit.frequency / 293_332.0 - 1.0).abs() < 1e-6);
        assert!((fit.t2star / 1.95e-3 - 1.0).abs() < 1e-6);
        assert!((fit.phase - 0.7).abs() < 1e-6);
        assert!((fit.offset - 1.0).abs() < 1e-9);
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn negative_amplitude_folds_into_phase() {
        let taus = linspace(0.0, 2e-3, 800);
        let y = synth(-0.02, 5e3, 0.2, 1e-3, 0.0, &taus);
        let fit = fit_decaying_sine(&FringeSeries::new(taus.clone(), y.clone()).unwrap()).unwrap();
        assert!(fit.amplitude > 0.0);
        for (t, v) in taus.iter().zip(&y) {
            assert!((fit.evaluate(*t) - v).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_series_is_rejected() {
        let taus = linspace(0.0, 1e-3, 100);
        let s = FringeSeries::new(taus, vec![1.0; 100]).unwrap();
        assert!(matches!(fit_decaying_sine(&s), Err(Error::InsufficientSpan(_))));
    }

    #[test]
    fn short_span_is_rejected() {
        let taus = linspace(0.0, 1e-4, 100);
        let y = synth(1.0, 3e3, 0.0, 1e-3, 0.0, &taus);
        assert!(fit_decaying_sine(&FringeSeries::new(taus, y).unwrap()).is_err());
        let taus = linspace(0.0, 1e-3, 5);
        let y = synth(1.0, 3e3, 0.0, 1e-3, 0.0, &taus);
        assert!(matches!(
            fit_decaying_sine(&FringeSeries::new(taus, y).unwrap()),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn noisy_fit_stays_within_three_sigma() {
        let taus = linspace(0.0, 5e-3, 500);
        let truth = [0.01, 5.2e3, 0.4, 1.95e-3, 0.003];
        let clean = synth(truth[0], truth[1], truth[2], truth[3], truth[4], &taus);
        let noise = Normal::new(0.0, 5e-4).unwrap();
        let trials = 500;
        let mut inside = [0usize; 5];
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let fit = fit_decaying_sine(&FringeSeries::new(taus.clone(), y).unwrap()).unwrap();
            let est = [fit.amplitude, fit.frequency, fit.phase, fit.t2star, fit.offset];
            let se = fit.std_errors();
            for i in 0..5 {
                if (est[i] - truth[i]).abs() <= 3.0 * se[i] {
                    inside[i] += 1;
                }
            }
        }
        for (name, count) in FringeFit::PARAMETER_NAMES.iter().zip(inside) {
            assert!(count * 100 >= 99 * trials as usize, "{name}: {count}/{trials}");
        }
    }
}
