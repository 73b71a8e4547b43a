//! End-to-end experiments assembled from a validated [`ExperimentConfig`]:
//! fringe scans, working-point calibration, rotation streams, Allan noise
//! runs and the sensitivity budget.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    allan_deviation, bias_stability, calibration_from_fringes, calibration_from_rotation_sweep,
    dynamic_range, fit_decaying_sine, log_log_slope, phase_wrap_rate, power_spectrum,
    rotation_from_signal, select_working_point, white_noise_density, Calibration, DynamicRange,
    FringeFit, LinearFit, Spectrum, WorkingPoint,
};
use crate::config::ExperimentConfig;
use crate::constants::{transition_frequencies, FieldEnvironment};
use crate::detector::{psn_rotation_sensitivity, ExtraNoise, Sensitivity};
use crate::error::{ensure, Error, Result};
use crate::sequence::{FringeSweep, SequenceConfig, Simulator};
use crate::series::{AllanSeries, GyroTimeSeries};
use crate::table::{run_profile_with, RateTimeline, RotationProfile, TableEnvironment, TelemetrySample};

/// Averaging times up to which an Allan curve is treated as white noise (s).
pub const WHITE_REGION_S: f64 = 1.0;

fn simulator(cfg: &ExperimentConfig, sequence: &SequenceConfig, noise: &ExtraNoise) -> Result<Simulator> {
    cfg.validate()?;
    Simulator::new(sequence, &cfg.detector, &cfg.constants)?.with_noise(noise)
}

fn at_rest(cfg: &ExperimentConfig) -> FieldEnvironment {
    cfg.environment.field().with_rotation(0.0)
}

#[derive(Debug, Clone)]
pub struct FringeExperiment {
    pub sweep: FringeSweep,
    pub fit: FringeFit,
    /// Model fringe frequency in the configured frame (Hz).
    pub fringe_frequency: f64,
    /// Single-quantum coherence frequencies in the configured frame (Hz).
    pub sq_frequencies: (f64, f64),
    pub single_spectra: Vec<Spectrum>,
    pub combined_spectrum: Spectrum,
}

/// Four single-Ramsey scans, their combination, spectra and a damped-sine fit
/// of the combined fringe.
pub fn run_fringes(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<FringeExperiment> {
    let sim = simulator(cfg, &cfg.sequence, &cfg.noise.extra())?;
    let env = cfg.environment.field();
    let prec = sim.precession(&env)?;
    let grid = &cfg.fringes;
    let step = (grid.tau_stop - grid.tau_start) / (grid.points - 1) as f64;
    let nyquist = 0.5 / step;
    if prec.dq_frequency().abs() >= nyquist {
        return Err(Error::InsufficientSpan(format!(
            "grid step {step:.3e} s samples up to {nyquist:.6e} Hz, below the {:.6e} Hz fringe",
            prec.dq_frequency().abs()
        )));
    }
    let sweep = sim.sweep(&env, &grid.taus(), seed)?;
    let combined = sweep.combined_series();
    let fit = fit_decaying_sine(&combined)?;
    let single_spectra = (0..4)
        .map(|k| power_spectrum(&sweep.single_series(k), 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(FringeExperiment {
        combined_spectrum: power_spectrum(&combined, 1)?,
        single_spectra,
        fringe_frequency: prec.dq_frequency(),
        sq_frequencies: prec.sq_frequencies(),
        fit,
        sweep,
    })
}

/// Working point and calibration obtained from fringes at rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GyroCalibration {
    pub tau_wp: f64,
    pub fit: FringeFit,
    pub calibration: Calibration,
    /// Signal expected at zero rotation.
    pub baseline: f64,
}

/// Places the working point and calibrates it from a fitted fringe scan taken
/// without rotation.
pub fn calibrate(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<GyroCalibration> {
    let sim = simulator(cfg, &cfg.sequence, &cfg.noise.extra())?;
    let env = at_rest(cfg);
    let tau_wp = if cfg.gyro.snap_working_point {
        sim.snap_working_point(&env, cfg.sequence.tau_wp)?
    } else {
        cfg.sequence.tau_wp
    };
    let sweep = sim.sweep(&env, &cfg.fringes.taus(), seed)?;
    let fit = fit_decaying_sine(&sweep.combined_series())?;
    let calibration = calibration_from_fringes(&fit, tau_wp)?;
    Ok(GyroCalibration {
        tau_wp,
        baseline: fit.evaluate(tau_wp),
        calibration,
        fit,
    })
}

/// White rotation noise of a stream from shot noise and per-reading noise
/// alone (Hz/sqrt(Hz)).
fn stream_psn_arw(sim: &Simulator, alpha_per_hz: f64) -> Result<f64> {
    let sigma = 2.0 * sim.single_sigma(1)? * sim.config().combine_scale();
    Ok(sigma * sim.config().cycle_period.sqrt() / alpha_per_hz.abs())
}

fn calibrated_stream(
    cfg: &ExperimentConfig,
    source: &dyn crate::sequence::EnvironmentSource,
    duration: f64,
    seed: Option<u64>,
) -> Result<(GyroCalibration, GyroTimeSeries, ExtraNoise, f64)> {
    let cal = calibrate(cfg, seed)?;
    let alpha = cal.calibration.per_hz;
    if alpha == 0.0 {
        return Err(Error::ZeroCalibration);
    }
    let sequence = SequenceConfig {
        tau_wp: cal.tau_wp,
        ..cfg.sequence.clone()
    };
    let base = simulator(cfg, &sequence, &cfg.noise.extra())?;
    let psn = stream_psn_arw(&base, alpha)?;
    let noise = cfg.noise.resolve(alpha, psn)?;
    let sim = base.with_noise(&noise)?;
    let mut stream = sim.stream(source, duration, seed)?;
    stream.nu_hat_hz = rotation_from_signal(&stream.signal, alpha, cal.baseline)?;
    stream.meta.alpha_per_hz = Some(alpha);
    stream.meta.baseline = Some(cal.baseline);
    let white_hz = (psn * psn + (noise.white_s / alpha).powi(2)).sqrt();
    Ok((cal, stream, noise, white_hz))
}

#[derive(Debug, Clone)]
pub struct GyroExperiment {
    pub calibration: GyroCalibration,
    pub telemetry: Vec<TelemetrySample>,
    pub stream: GyroTimeSeries,
    pub noise: ExtraNoise,
    /// Expected white rotation noise per stream sample (Hz).
    pub predicted_sigma_hz: f64,
    /// Signal against table rate, present when the program changes the rate.
    pub sweep: Option<(Calibration, LinearFit)>,
}

/// Runs a rotation program on the table and the working-point stream on top of it.
pub fn run_gyro(
    cfg: &ExperimentConfig,
    profile: &RotationProfile,
    duration: Option<f64>,
    seed: Option<u64>,
) -> Result<GyroExperiment> {
    let duration = duration.unwrap_or_else(|| profile.total_duration());
    ensure(duration > 0.0, "duration", "must be > 0 (empty profile needs an explicit duration)")?;
    let timeline = RateTimeline::new(profile, &cfg.table)?;
    let telemetry = run_profile_with(profile, &cfg.table, seed)?;
    let source = TableEnvironment {
        base: cfg.environment.field(),
        timeline,
    };
    let (calibration, stream, noise, white_hz) = calibrated_stream(cfg, &source, duration, seed)?;
    let rates = &stream.reference_rate_hz;
    let spread = rates.iter().copied().fold(f64::MIN, f64::max) - rates.iter().copied().fold(f64::MAX, f64::min);
    let sweep = if spread > 0.0 {
        Some(calibration_from_rotation_sweep(rates, &stream.signal)?)
    } else {
        None
    };
    Ok(GyroExperiment {
        predicted_sigma_hz: white_hz / cfg.sequence.cycle_period.sqrt(),
        calibration,
        telemetry,
        stream,
        noise,
        sweep,
    })
}

#[derive(Debug, Clone)]
pub struct AllanExperiment {
    pub calibration: GyroCalibration,
    pub stream: GyroTimeSeries,
    pub noise: ExtraNoise,
    /// Allan deviation of the rotation estimate (Hz).
    pub allan: AllanSeries,
    /// Measured white-noise density (Hz/sqrt(Hz)).
    pub arw_hz: f64,
    /// Expected white-noise density from the noise model (Hz/sqrt(Hz)).
    pub predicted_arw_hz: f64,
    pub slope: f64,
    pub bias_stability: (f64, f64),
    /// Closed-form shot-noise budget at the working point.
    pub psn_budget: Sensitivity,
}

/// Non-rotating stream and its Allan deviation.
pub fn run_allan(cfg: &ExperimentConfig, duration: f64, seed: Option<u64>) -> Result<AllanExperiment> {
    let env = cfg.environment.field();
    let (calibration, stream, noise, predicted) = calibrated_stream(cfg, &env, duration, seed)?;
    let tau0 = cfg.sequence.cycle_period;
    let allan = allan_deviation(&stream.nu_hat_hz, tau0)?;
    let white_max = WHITE_REGION_S.max(4.0 * tau0);
    Ok(AllanExperiment {
        arw_hz: white_noise_density(&allan, white_max).unwrap_or(f64::NAN),
        slope: log_log_slope(&allan, white_max)?,
        bias_stability: bias_stability(&allan).unwrap_or((f64::NAN, f64::NAN)),
        psn_budget: psn_rotation_sensitivity(&cfg.detector, calibration.tau_wp, cfg.constants.q_e)?,
        predicted_arw_hz: predicted,
        calibration,
        stream,
        noise,
        allan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub fringe_frequency: f64,
    pub carriers: (f64, f64),
    pub tau_wp: f64,
    pub sensitivity: Sensitivity,
    /// Rotation rate shifting the fringe phase by one radian (Hz).
    pub nu0: f64,
    pub epsilon: f64,
    pub dynamic_range: DynamicRange,
    /// Per-Ramsey time not spent precessing, `t_meas - tau_wp` (s).
    pub overhead: f64,
    pub working_point: WorkingPoint,
}

pub fn budget(cfg: &ExperimentConfig, epsilon: f64) -> Result<Budget> {
    cfg.validate()?;
    let env = at_rest(cfg);
    let sim = simulator(cfg, &cfg.sequence, &cfg.noise.extra())?;
    let fringe_frequency = sim.fringe_frequency(&env)?;
    let tau_wp = cfg.sequence.tau_wp;
    let nu0 = phase_wrap_rate(tau_wp)?;
    let overhead = (cfg.detector.t_meas - tau_wp).max(0.0);
    Ok(Budget {
        carriers: transition_frequencies(&env, &cfg.constants)?,
        sensitivity: psn_rotation_sensitivity(&cfg.detector, tau_wp, cfg.constants.q_e)?,
        dynamic_range: dynamic_range(epsilon, nu0)?,
        working_point: select_working_point(cfg.detector.t2star, fringe_frequency, overhead)?,
        fringe_frequency,
        tau_wp,
        nu0,
        epsilon,
        overhead,
    })
}
