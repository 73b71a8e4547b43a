//! Optical readout: populations to fluorescence voltage with photon shot noise,
//! and the shot-noise-limited sensitivity budget.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::spin::Populations;
use crate::units::hz_to_dps;

/// Photodetector and readout parameters.
///
/// `contrast` is the peak-to-peak fringe contrast `(V_H - V_L) / V0`.
/// `readout_weights` sets how each `m_I` population contributes to the
/// projection that moves the voltage from `V_L` (0) to `V_H` (1); the default
/// `(1, 0, 1)` reads out the population outside `|0>`, which the second
/// double-quantum pulse swings over the full range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    #[serde(rename = "V0")]
    pub v0: f64,
    #[serde(rename = "G")]
    pub gain: f64,
    #[serde(rename = "C")]
    pub contrast: f64,
    pub t_r: f64,
    pub balanced: bool,
    #[serde(rename = "T2star")]
    pub t2star: f64,
    pub t_meas: f64,
    pub readout_weights: [f64; 3],
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            v0: 15.0,
            gain: 1.75e5,
            contrast: 0.015,
            t_r: 17e-6,
            balanced: true,
            t2star: 1.95e-3,
            t_meas: 1.92e-3,
            readout_weights: [1.0, 0.0, 1.0],
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.v0 > 0.0, "V0", "must be > 0")?;
        ensure(self.gain > 0.0, "G", "must be > 0")?;
        ensure(
            self.contrast > 0.0 && self.contrast < 1.0,
            "C",
            "must lie in (0, 1)",
        )?;
        ensure(self.t_r > 0.0, "t_r", "must be > 0")?;
        ensure(self.t2star > 0.0, "T2star", "must be > 0")?;
        ensure(self.t_meas > 0.0, "t_meas", "must be > 0")?;
        ensure(
            self.readout_weights.iter().all(|w| (0.0..=1.0).contains(w)),
            "readout_weights",
            "each weight must lie in [0, 1]",
        )
    }

    pub fn v_high(&self) -> f64 {
        self.v0 * (1.0 + 0.5 * self.contrast)
    }

    pub fn v_low(&self) -> f64 {
        self.v0 * (1.0 - 0.5 * self.contrast)
    }

    /// Weighted population in `[0, 1]`.
    pub fn projection(&self, p: &Populations) -> f64 {
        let w = self.readout_weights;
        w[0] * p.plus + w[1] * p.zero + w[2] * p.minus
    }

    /// Noise-free voltage for a projection value.
    pub fn mean_voltage(&self, projection: f64) -> f64 {
        self.v_low() + (self.v_high() - self.v_low()) * projection
    }
}

/// Readout voltage of a single measurement. Adds Gaussian shot noise when an
/// RNG is supplied.
pub fn readout_voltage<R: Rng + ?Sized>(
    p: &Populations,
    d: &DetectorConfig,
    q_e: f64,
    rng: Option<&mut R>,
) -> Result<f64> {
    readout_voltage_averaged(p, d, 1, q_e, rng)
}

/// Readout voltage averaged over `n_meas` repetitions.
pub fn readout_voltage_averaged<R: Rng + ?Sized>(
    p: &Populations,
    d: &DetectorConfig,
    n_meas: u64,
    q_e: f64,
    rng: Option<&mut R>,
) -> Result<f64> {
    let mean = d.mean_voltage(d.projection(p));
    Ok(match rng {
        Some(rng) => {
            let sigma = psn_fractional_uncertainty(d, n_meas, q_e)? * d.v0;
            let z: f64 = rng.sample(StandardNormal);
            mean + sigma * z
        }
        None => mean,
    })
}

/// Fractional fluorescence `S = V / V_pump`.
pub fn normalize_contrast(v: f64, v_pump: f64) -> Result<f64> {
    ensure(v_pump > 0.0, "V_pump", "must be > 0")?;
    Ok(v / v_pump)
}

/// Detected photoelectrons over `n_meas` readout windows.
pub fn photoelectron_count(d: &DetectorConfig, n_meas: u64, q_e: f64) -> Result<f64> {
    ensure(n_meas >= 1, "N_meas", "must be >= 1")?;
    Ok(d.v0 / (d.gain * q_e) * d.t_r * n_meas as f64)
}

/// `dV_PSN / V0`; balanced detection doubles the shot-noise photons.
pub fn psn_fractional_uncertainty(d: &DetectorConfig, n_meas: u64, q_e: f64) -> Result<f64> {
    let n_p = photoelectron_count(d, n_meas, q_e)?;
    let balance = if d.balanced { 2.0 } else { 1.0 };
    Ok((balance / n_p).sqrt())
}

/// Shot-noise-limited rotation sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    /// Hz/sqrt(Hz) of rotation rate.
    pub hz_per_rt_hz: f64,
    /// deg/sqrt(s).
    pub dps_per_rt_s: f64,
}

impl Sensitivity {
    pub fn from_hz(hz_per_rt_hz: f64) -> Self {
        Self {
            hz_per_rt_hz,
            dps_per_rt_s: hz_to_dps(hz_per_rt_hz),
        }
    }
}

/// Rotation-rate uncertainty for one second of averaging at free precession
/// time `tau`. The rotation shift is half the line shift.
pub fn psn_rotation_sensitivity(d: &DetectorConfig, tau: f64, q_e: f64) -> Result<Sensitivity> {
    ensure(tau > 0.0, "tau", "must be > 0")?;
    let slope = tau * (-tau / d.t2star).exp();
    let balance = if d.balanced { 2.0 } else { 1.0 };
    let noise = (balance * d.gain * q_e / (d.v0 * d.t_r)).sqrt();
    let hz = 1.0 / (2.0 * PI) / slope / d.contrast * noise * d.t_meas.sqrt();
    Ok(Sensitivity::from_hz(hz))
}

/// Technical noise beyond photon shot noise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtraNoise {
    /// White noise density on the combined signal of a stream (1/sqrt(Hz)).
    pub white_s: f64,
    /// Random-walk coefficient of a signal offset (1/sqrt(s)).
    pub random_walk_s: f64,
    /// White noise on every single-Ramsey reading, added in quadrature to
    /// shot noise.
    pub per_reading: f64,
}

impl ExtraNoise {
    pub fn validate(&self) -> Result<()> {
        ensure(self.white_s >= 0.0, "white_s", "must be >= 0")?;
        ensure(self.random_walk_s >= 0.0, "random_walk_s", "must be >= 0")?;
        ensure(self.per_reading >= 0.0, "per_reading", "must be >= 0")
    }

    pub fn is_zero(&self) -> bool {
        self.white_s == 0.0 && self.random_walk_s == 0.0 && self.per_reading == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const QE: f64 = 1.602_176_634e-19;

    fn bright() -> Populations {
        Populations {
            plus: 1.0,
            zero: 0.0,
            minus: 0.0,
        }
    }

    fn dark() -> Populations {
        Populations {
            plus: 0.0,
            zero: 1.0,
            minus: 0.0,
        }
    }

    #[test]
    fn noiseless_levels() {
        let d = DetectorConfig::default();
        let v = readout_voltage::<ChaCha8Rng>(&bright(), &d, QE, None).unwrap();
        assert_relative_eq!(v, 15.1125, epsilon = 1e-12);
        let v = readout_voltage::<ChaCha8Rng>(&dark(), &d, QE, None).unwrap();
        assert_relative_eq!(v, 14.8875, epsilon = 1e-12);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_contrast(15.0, 15.0).unwrap(), 1.0);
        assert_relative_eq!(normalize_contrast(15.1125, 15.0).unwrap(), 1.0075, epsilon = 1e-12);
        assert!(normalize_contrast(1.0, 0.0).is_err());
        // a fixed reference leaves the fractional uncertainty unchanged
        let dv = 0.01;
        let s0 = normalize_contrast(15.0, 15.0).unwrap();
        let ds = normalize_contrast(dv, 15.0).unwrap();
        assert_relative_eq!(ds / s0, dv / 15.0);
    }

    #[test]
    fn photoelectrons() {
        let d = DetectorConfig::default();
        let n = photoelectron_count(&d, 1, QE).unwrap();
        let oracle = 15.0 / (1.75e5 * 1.602e-19) * 17e-6;
        assert_relative_eq!(n, oracle, max_relative = 2e-4);
        assert!((n - 9.1e9).abs() < 0.05e9);
        assert!(photoelectron_count(&d, 0, QE).is_err());
        let doubled = DetectorConfig { t_r: 34e-6, ..d };
        assert_relative_eq!(photoelectron_count(&doubled, 1, QE).unwrap(), 2.0 * n);
    }

    #[test]
    fn fractional_uncertainty() {
        let d = DetectorConfig::default();
        let u = psn_fractional_uncertainty(&d, 1, QE).unwrap();
        let n = photoelectron_count(&d, 1, QE).unwrap();
        assert_relative_eq!(u, (2.0 / n).sqrt());
        assert!((u - 1.48e-5).abs() < 0.01e-5, "u = {u}");
        let unbalanced = DetectorConfig { balanced: false, ..d };
        let v = psn_fractional_uncertainty(&unbalanced, 1, QE).unwrap();
        assert_relative_eq!(u / v, 2f64.sqrt(), epsilon = 1e-12);
        // N_p = 2 with balanced detection gives exactly one
        let q = d.v0 * d.t_r / (2.0 * d.gain);
        assert_relative_eq!(psn_fractional_uncertainty(&d, 1, q).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sensitivity_budget() {
        let d = DetectorConfig {
            t2star: 2.0e-3,
            ..DetectorConfig::default()
        };
        let s = psn_rotation_sensitivity(&d, 1.4e-3, 1.6e-19).unwrap();
        assert!((s.hz_per_rt_hz - 9.8e-3).abs() / 9.8e-3 < 0.02, "{s:?}");
        assert_relative_eq!(s.dps_per_rt_s, 360.0 * s.hz_per_rt_hz);
        let tiny = psn_rotation_sensitivity(&d, 1e-9, 1.6e-19).unwrap();
        assert!(tiny.hz_per_rt_hz > 1e3);
        assert!(psn_rotation_sensitivity(&d, 0.0, QE).is_err());
    }

    #[test]
    fn sensitivity_optimum_with_overhead() {
        // with per-measurement time t_meas = tau + overhead the sensitivity
        // scales as sqrt(tau + overhead) / (tau exp(-tau/T2)); scan it directly
        let t2 = 1.95e-3;
        let overhead = 0.52e-3;
        let d = DetectorConfig::default();
        let cost = |tau: f64| {
            let dd = DetectorConfig {
                t_meas: tau + overhead,
                ..d
            };
            psn_rotation_sensitivity(&dd, tau, QE).unwrap().hz_per_rt_hz
        };
        let taus: Vec<f64> = (1..4000).map(|i| i as f64 * 1e-6).collect();
        let best = taus
            .iter()
            .copied()
            .min_by(|a, b| cost(*a).partial_cmp(&cost(*b)).unwrap())
            .unwrap();
        let stationary = |tau: f64| 1.0 / tau - 1.0 / t2 - 1.0 / (2.0 * (tau + overhead));
        assert!(stationary(best - 1e-6) > 0.0 && stationary(best + 1e-6) < 0.0);
        // convex around the optimum
        let h = 50e-6;
        assert!(cost(best - h) + cost(best + h) - 2.0 * cost(best) > 0.0);
    }

    #[test]
    fn monte_carlo_noise_matches_budget() {
        let d = DetectorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| readout_voltage(&bright(), &d, QE, Some(&mut rng)).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected = psn_fractional_uncertainty(&d, 1, QE).unwrap() * d.v0;
        assert!((var.sqrt() / expected - 1.0).abs() < 0.02);

        let unbalanced = DetectorConfig { balanced: false, ..d };
        let draws_u: Vec<f64> = (0..n)
            .map(|_| readout_voltage(&bright(), &unbalanced, QE, Some(&mut rng)).unwrap())
            .collect();
        let mean_u = draws_u.iter().sum::<f64>() / n as f64;
        let var_u = draws_u.iter().map(|v| (v - mean_u).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(((var / var_u).sqrt() / 2f64.sqrt() - 1.0).abs() < 0.02);
    }
}
