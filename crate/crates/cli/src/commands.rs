use std::path::Path;

use anyhow::Result;
use nvgyro_core::analysis::{calibration_from_amplitude, FringeFit};
use nvgyro_core::units::{hz_to_dps, to_percent};
use nvgyro_core::{
    budget, run_allan, run_fringes, run_gyro, ExperimentConfig, RotationProfile,
};
use serde::Serialize;
use serde_json::json;

use crate::output::OutDir;

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub seed: Option<u64>,
    pub config_path: Option<&'a Path>,
}

impl Context<'_> {
    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self.config).unwrap_or(serde_json::Value::Null)
    }

    fn config_input(&self) -> serde_json::Value {
        json!(self.config_path.map(|p| p.display().to_string()))
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    model: &'static str,
    parameters: serde_json::Map<String, serde_json::Value>,
    covariance: &'a [[f64; 5]; 5],
    parameter_order: [&'static str; 5],
    residual_rms: f64,
    iterations: usize,
    model_fringe_frequency_hz: f64,
    frequency_offset_sigma: f64,
    amplitude_percent: f64,
    alpha_percent_per_dps: f64,
}

fn fit_parameters(fit: &FringeFit) -> serde_json::Map<String, serde_json::Value> {
    let values = [fit.amplitude, fit.frequency, fit.phase, fit.t2star, fit.offset];
    let units = ["frac", "hz", "rad", "s", "frac"];
    let errors = fit.std_errors();
    FringeFit::PARAMETER_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            (
                format!("{name}_{}", units[i]),
                json!({ "value": values[i], "std_error": errors[i] }),
            )
        })
        .collect()
}

pub fn fringes(ctx: &Context, out: &Path) -> Result<()> {
    let cfg = ctx.config;
    let exp = run_fringes(cfg, ctx.seed)?;
    let mut dir = OutDir::create(out)?;
    let sweep = &exp.sweep;

    dir.csv(
        "fringes_single.csv",
        &["tau_s", "R1_frac", "R2_frac", "R3_frac", "R4_frac", "sigma_frac"],
        (0..sweep.taus.len()).map(|i| {
            [
                sweep.taus[i],
                sweep.singles[0][i],
                sweep.singles[1][i],
                sweep.singles[2][i],
                sweep.singles[3][i],
                sweep.sigma_single,
            ]
        }),
    )?;
    dir.csv(
        "fringes_combined.csv",
        &["tau_s", "R_frac", "sigma_frac", "fit_frac"],
        sweep
            .taus
            .iter()
            .zip(&sweep.combined)
            .map(|(&t, &r)| [t, r, sweep.sigma_combined, exp.fit.evaluate(t)]),
    )?;
    let spectra = &exp.single_spectra;
    let combined = &exp.combined_spectrum;
    dir.csv(
        "spectra.csv",
        &["freq_hz", "power_R1_frac2", "power_R2_frac2", "power_R3_frac2", "power_R4_frac2", "power_R_frac2"],
        (0..combined.freqs.len()).map(|k| {
            [
                combined.freqs[k],
                spectra[0].power[k],
                spectra[1].power[k],
                spectra[2].power[k],
                spectra[3].power[k],
                combined.power[k],
            ]
        }),
    )?;

    let fit = &exp.fit;
    let errors = fit.std_errors();
    let alpha = calibration_from_amplitude(fit.envelope(cfg.sequence.tau_wp), cfg.sequence.tau_wp)?;
    let report = FitReport {
        model: "amplitude * exp(-tau / t2star) * sin(2 pi frequency tau + phase) + offset",
        parameters: fit_parameters(fit),
        covariance: &fit.covariance,
        parameter_order: FringeFit::PARAMETER_NAMES,
        residual_rms: fit.residual_rms,
        iterations: fit.iterations,
        model_fringe_frequency_hz: exp.fringe_frequency,
        frequency_offset_sigma: (fit.frequency - exp.fringe_frequency) / errors[1],
        amplitude_percent: to_percent(fit.envelope(cfg.sequence.tau_wp)),
        alpha_percent_per_dps: alpha.percent_per_dps(),
    };
    dir.json("fit.json", &report)?;

    println!("fringe frequency  model {:.3} Hz  fit {:.3} +/- {:.3} Hz", exp.fringe_frequency, fit.frequency, errors[1]);
    println!("T2*               {:.4} +/- {:.4} ms", fit.t2star * 1e3, errors[3] * 1e3);
    println!("amplitude at tau_wp {:.4} %", report.amplitude_percent);
    println!("alpha             {:.4e} %/(deg/s)", report.alpha_percent_per_dps);

    let manifest = dir.finish("fringes", ctx.seed, ctx.snapshot(), json!({ "config": ctx.config_input() }))?;
    println!("wrote {}", manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct GyroSummary {
    tau_wp_s: f64,
    alpha_percent_per_dps: f64,
    alpha_per_hz: f64,
    baseline_frac: f64,
    calibration_warning: Option<String>,
    samples: usize,
    white_s: f64,
    predicted_sigma_dps: f64,
    rms_disagreement_dps: f64,
    mean_nu_hat_dps: f64,
    mean_table_rate_dps: f64,
}

#[derive(Serialize)]
struct Regression {
    alpha_percent_per_dps: f64,
    alpha_std_error_percent_per_dps: f64,
    intercept_frac: f64,
    intercept_std_error_frac: f64,
    r_squared: f64,
    n: usize,
    fringe_alpha_percent_per_dps: f64,
    relative_difference: f64,
}

pub fn gyro(ctx: &Context, profile: &RotationProfile, profile_path: &Path, duration: Option<f64>, out: &Path) -> Result<()> {
    let exp = run_gyro(ctx.config, profile, duration, ctx.seed)?;
    let mut dir = OutDir::create(out)?;
    let stream = &exp.stream;

    dir.csv(
        "telemetry.csv",
        &["t_s", "angle_deg", "rate_dps", "accel_dps2"],
        exp.telemetry.iter().map(|s| [s.t, s.angle_deg, s.rate_dps, s.accel_dps2]),
    )?;
    dir.csv(
        "stream.csv",
        &["t_s", "signal_frac", "table_rate_dps", "nu_hat_dps"],
        (0..stream.len()).map(|i| {
            [
                stream.t[i],
                stream.signal[i],
                hz_to_dps(stream.reference_rate_hz[i]),
                hz_to_dps(stream.nu_hat_hz[i]),
            ]
        }),
    )?;

    let cal = &exp.calibration;
    let n = stream.len() as f64;
    let residual: Vec<f64> = stream
        .nu_hat_hz
        .iter()
        .zip(&stream.reference_rate_hz)
        .map(|(a, b)| a - b)
        .collect();
    let rms = (residual.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let summary = GyroSummary {
        tau_wp_s: cal.tau_wp,
        alpha_percent_per_dps: cal.calibration.percent_per_dps(),
        alpha_per_hz: cal.calibration.per_hz,
        baseline_frac: cal.baseline,
        calibration_warning: cal.calibration.warning.clone(),
        samples: stream.len(),
        white_s: exp.noise.white_s,
        predicted_sigma_dps: hz_to_dps(exp.predicted_sigma_hz),
        rms_disagreement_dps: hz_to_dps(rms),
        mean_nu_hat_dps: hz_to_dps(stream.nu_hat_hz.iter().sum::<f64>() / n),
        mean_table_rate_dps: hz_to_dps(stream.reference_rate_hz.iter().sum::<f64>() / n),
    };
    println!("working point     {:.6} ms", cal.tau_wp * 1e3);
    println!("alpha (fringes)   {:.4e} %/(deg/s)", summary.alpha_percent_per_dps);
    println!(
        "gyro - table rms  {:.4} deg/s  (predicted {:.4} deg/s)",
        summary.rms_disagreement_dps, summary.predicted_sigma_dps
    );
    dir.json("gyro_summary.json", &summary)?;

    if let Some((sweep_cal, fit)) = &exp.sweep {
        let scale = to_percent(1.0) / hz_to_dps(1.0);
        let reg = Regression {
            alpha_percent_per_dps: sweep_cal.percent_per_dps(),
            alpha_std_error_percent_per_dps: fit.slope_se * scale,
            intercept_frac: fit.intercept,
            intercept_std_error_frac: fit.intercept_se,
            r_squared: fit.r_squared,
            n: fit.n,
            fringe_alpha_percent_per_dps: summary.alpha_percent_per_dps,
            relative_difference: sweep_cal.per_hz / cal.calibration.per_hz - 1.0,
        };
        println!(
            "alpha (sweep)     {:.4e} +/- {:.1e} %/(deg/s)  ({:+.2} % from fringes)",
            reg.alpha_percent_per_dps,
            reg.alpha_std_error_percent_per_dps,
            reg.relative_difference * 100.0
        );
        dir.json("regression.json", &reg)?;
    }

    let inputs = json!({
        "config": ctx.config_input(),
        "profile": profile_path.display().to_string(),
        "profile_csv": profile.to_csv_string(),
        "duration_s": duration,
    });
    let manifest = dir.finish("gyro", ctx.seed, ctx.snapshot(), inputs)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct AllanSummary {
    samples: usize,
    tau0_s: f64,
    tau_wp_s: f64,
    arw_hz_per_rt_hz: f64,
    arw_dps_per_rt_s: f64,
    predicted_arw_hz_per_rt_hz: f64,
    psn_budget_hz_per_rt_hz: f64,
    white_s: f64,
    log_log_slope: f64,
    bias_stability_tau_s: f64,
    bias_stability_hz: f64,
}

pub fn allan(ctx: &Context, duration: f64, out: &Path) -> Result<()> {
    let exp = run_allan(ctx.config, duration, ctx.seed)?;
    let mut dir = OutDir::create(out)?;
    let stream = &exp.stream;

    dir.csv(
        "stream.csv",
        &["t_s", "signal_frac", "nu_hat_hz"],
        (0..stream.len()).map(|i| [stream.t[i], stream.signal[i], stream.nu_hat_hz[i]]),
    )?;
    let allan = &exp.allan;
    dir.csv(
        "allan.csv",
        &["tau_s", "adev_hz", "adev_dps", "terms"],
        (0..allan.len()).map(|i| [allan.tau_avg[i], allan.adev[i], hz_to_dps(allan.adev[i]), allan.n_terms[i] as f64]),
    )?;
    let summary = AllanSummary {
        samples: stream.len(),
        tau0_s: ctx.config.sequence.cycle_period,
        tau_wp_s: exp.calibration.tau_wp,
        arw_hz_per_rt_hz: exp.arw_hz,
        arw_dps_per_rt_s: hz_to_dps(exp.arw_hz),
        predicted_arw_hz_per_rt_hz: exp.predicted_arw_hz,
        psn_budget_hz_per_rt_hz: exp.psn_budget.hz_per_rt_hz,
        white_s: exp.noise.white_s,
        log_log_slope: exp.slope,
        bias_stability_tau_s: exp.bias_stability.0,
        bias_stability_hz: exp.bias_stability.1,
    };
    println!(
        "ARW               {:.3} mHz/rtHz  (model {:.3}, shot-noise budget {:.3})",
        summary.arw_hz_per_rt_hz * 1e3,
        summary.predicted_arw_hz_per_rt_hz * 1e3,
        summary.psn_budget_hz_per_rt_hz * 1e3
    );
    println!("log-log slope     {:.3}", summary.log_log_slope);
    println!(
        "bias stability    {:.3} mHz at {:.1} s",
        summary.bias_stability_hz * 1e3,
        summary.bias_stability_tau_s
    );
    dir.json("allan_summary.json", &summary)?;

    let inputs = json!({ "config": ctx.config_input(), "duration_s": duration });
    let manifest = dir.finish("allan", ctx.seed, ctx.snapshot(), inputs)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

pub fn budget_report(ctx: &Context, epsilon: f64, out: Option<&Path>) -> Result<()> {
    let b = budget(ctx.config, epsilon)?;
    let wp = &b.working_point;
    println!("fringe frequency      {:.3} Hz", b.fringe_frequency);
    println!("carriers              f1 {:.6} Hz  f2 {:.6} Hz", b.carriers.0, b.carriers.1);
    println!(
        "shot-noise sensitivity {:.3} mHz/rtHz  ({:.3} deg/s/rtHz) at tau_wp {:.4} ms",
        b.sensitivity.hz_per_rt_hz * 1e3,
        b.sensitivity.dps_per_rt_s,
        b.tau_wp * 1e3
    );
    println!("phase-wrap rate nu0   {:.3} Hz", b.nu0);
    println!(
        "dynamic range         +/- {:.4} Hz  (+/- {:.1} deg/s) at epsilon {:e}",
        b.dynamic_range.hz, b.dynamic_range.dps, b.epsilon
    );
    println!(
        "working point         per-shot {:.4} ms  time-optimal {:.4} ms  snapped {:.6} ms  (overhead {:.4} ms, cos residual {:.1e})",
        wp.per_shot_optimum * 1e3,
        wp.time_optimum * 1e3,
        wp.snapped * 1e3,
        b.overhead * 1e3,
        wp.cosine_residual
    );
    if let Some(out) = out {
        let mut dir = OutDir::create(out)?;
        dir.json("budget.json", &b)?;
        let inputs = json!({ "config": ctx.config_input(), "epsilon": epsilon });
        let manifest = dir.finish("budget", ctx.seed, ctx.snapshot(), inputs)?;
        println!("wrote {}", manifest.display());
    }
    Ok(())
}
