use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fit::FringeFit;
use super::regression::{linear_regression, LinearFit};
use crate::error::{ensure, Error, Result};
use crate::units::DPS_PER_HZ;

/// `|sin|` of the fitted fringe phase at the working point above which the
/// working point is reported as misaligned.
pub const MISALIGNMENT_WARNING: f64 = 0.1;

/// Signal change per unit rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Fractional signal per Hz of rotation.
    pub per_hz: f64,
    /// Phase error at the working point, `|sin(2 pi f tau_wp + phi)|` for a
    /// fitted fringe, 0 for the other methods.
    pub misalignment: f64,
    pub warning: Option<String>,
}

impl Calibration {
    pub fn new(per_hz: f64) -> Self {
        Self {
            per_hz,
            misalignment: 0.0,
            warning: None,
        }
    }

    pub fn percent_per_hz(&self) -> f64 {
        100.0 * self.per_hz
    }

    pub fn percent_per_dps(&self) -> f64 {
        self.percent_per_hz() / DPS_PER_HZ
    }

    pub fn per_dps(&self) -> f64 {
        self.per_hz / DPS_PER_HZ
    }
}

/// `4 pi tau_wp A`, with `A` the fringe amplitude at the working point.
pub fn calibration_from_amplitude(amplitude_at_wp: f64, tau_wp: f64) -> Result<Calibration> {
    ensure(tau_wp > 0.0, "tau_wp", "must be > 0")?;
    Ok(Calibration::new(4.0 * PI * tau_wp * amplitude_at_wp))
}

/// Calibration from a fitted fringe. Rotation adds `2 nu` to the fringe
/// frequency, so the slope is `4 pi tau_wp A(tau_wp) cos(2 pi f tau_wp + phi)`.
/// The sign follows the fringe slope; the working point should sit where the
/// fitted sine crosses its offset.
pub fn calibration_from_fringes(fit: &FringeFit, tau_wp: f64) -> Result<Calibration> {
    ensure(tau_wp > 0.0, "tau_wp", "must be > 0")?;
    let theta = 2.0 * PI * fit.frequency * tau_wp + fit.phase;
    let misalignment = theta.sin().abs();
    let per_hz = 4.0 * PI * tau_wp * fit.envelope(tau_wp) * theta.cos();
    let warning = (misalignment > MISALIGNMENT_WARNING).then(|| {
        format!("working point misaligned: |sin(fringe phase)| = {misalignment:.3}")
    });
    Ok(Calibration {
        per_hz,
        misalignment,
        warning,
    })
}

/// `2 (tau_wp / f) dS/dtau`, with the slope taken at the working point.
pub fn calibration_from_slope(ds_dtau: f64, tau_wp: f64, fringe_freq: f64) -> Result<Calibration> {
    ensure(tau_wp > 0.0, "tau_wp", "must be > 0")?;
    ensure(fringe_freq != 0.0 && fringe_freq.is_finite(), "fringe_freq", "must be nonzero")?;
    Ok(Calibration::new(2.0 * tau_wp / fringe_freq * ds_dtau))
}

/// Regression of signal against applied rotation rate (Hz).
pub fn calibration_from_rotation_sweep(rate_hz: &[f64], signal: &[f64]) -> Result<(Calibration, LinearFit)> {
    let line = linear_regression(rate_hz, signal)?;
    Ok((Calibration::new(line.slope), line))
}

/// Rotation estimate `(S - baseline) / alpha` (Hz).
pub fn rotation_from_signal(signal: &[f64], alpha_per_hz: f64, baseline: f64) -> Result<Vec<f64>> {
    if alpha_per_hz == 0.0 || !alpha_per_hz.is_finite() {
        return Err(Error::ZeroCalibration);
    }
    Ok(signal.iter().map(|s| (s - baseline) / alpha_per_hz).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fit_with(a: f64, f: f64, phase: f64, t2: f64) -> FringeFit {
        FringeFit {
            amplitude: a,
            frequency: f,
            phase,
            t2star: t2,
            offset: 0.0,
            covariance: [[0.0; 5]; 5],
            residual_rms: 0.0,
            iterations: 0,
        }
    }

    #[test]
    fn amplitude_method_quoted_numbers() {
        let c = calibration_from_amplitude(0.0132, 1.428e-3).unwrap();
        // 4 pi * 1.428e-3 * 1.32 % = 2.3687e-2 %/Hz
        assert_relative_eq!(c.percent_per_hz(), 2.3687e-2, max_relative = 1e-4);
        assert_relative_eq!(c.percent_per_dps(), 6.58e-5, max_relative = 2e-3);
        assert!((c.percent_per_dps() / 6.56e-5 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn doubling_amplitude_doubles_alpha() {
        let a = calibration_from_amplitude(0.01, 1e-3).unwrap().per_hz;
        let b = calibration_from_amplitude(0.02, 1e-3).unwrap().per_hz;
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-15);
    }

    #[test]
    fn aligned_fringe_matches_amplitude_method() {
        let (f, tau, t2) = (293_000.0, 1.4e-3, 1.95e-3);
        let phase = -2.0 * PI * f * tau;
        let fit = fit_with(0.03, f, phase, t2);
        let c = calibration_from_fringes(&fit, tau).unwrap();
        let expected = calibration_from_amplitude(0.03 * (-tau / t2).exp(), tau).unwrap();
        assert_relative_eq!(c.per_hz, expected.per_hz, max_relative = 1e-6);
        assert!(c.warning.is_none());
        let off = calibration_from_fringes(&fit_with(0.03, f, phase + 0.5, t2), tau).unwrap();
        assert!(off.warning.is_some());
    }

    #[test]
    fn slope_method_agrees_with_fringe_method() {
        let (a, f, tau, t2) = (0.02, 5_000.0, 1.45e-3, 1.95e-3);
        let phase = -2.0 * PI * f * tau;
        let fit = fit_with(a, f, phase, t2);
        let h = 1e-9;
        let slope = (fit.evaluate(tau + h) - fit.evaluate(tau - h)) / (2.0 * h);
        let s = calibration_from_slope(slope, tau, f).unwrap();
        let c = calibration_from_fringes(&fit, tau).unwrap();
        assert_relative_eq!(s.per_hz, c.per_hz, max_relative = 1e-5);
        assert_eq!(calibration_from_slope(0.0, tau, f).unwrap().per_hz, 0.0);
    }

    #[test]
    fn rotation_inversion() {
        let nu = rotation_from_signal(&[1.0, 1.5, 0.5], 0.5, 1.0).unwrap();
        assert_eq!(nu, vec![0.0, 1.0, -1.0]);
        assert!(matches!(
            rotation_from_signal(&[1.0], 0.0, 0.0),
            Err(Error::ZeroCalibration)
        ));
    }
}
