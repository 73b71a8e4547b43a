//! Double-quantum Ramsey and 4-Ramsey experiments built from the spin
//! primitives: pump reset, SQ pi pulse, two DQ pulses around a free
//! precession window, optical readout.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{FieldEnvironment, PhysicalConstants};
use crate::detector::{psn_fractional_uncertainty, DetectorConfig, ExtraNoise};
use crate::error::{ensure, invalid, Error, Result};
use crate::series::{FringeSeries, GyroTimeSeries, StreamMeta};
use crate::spin::{pulse_unitary, Dephasing, Mat3, Precession, PulseSpec, RfFrame, SpinState};

/// RNG used for every stochastic path; seeded streams keep runs reproducible.
pub type SimRng = ChaCha8Rng;

/// Second-pulse phases `(phase_f1, phase_f2)` of R1..R4. The DQ response
/// follows the phase sum and alternates `+,-,+,-`; each SQ response follows a
/// single tone and cancels in `R1 - R2 + R3 - R4`.
/// RNG stream reserved for working-point streams; sweeps use streams `0..n`.
pub const GYRO_RNG_STREAM: u64 = u64::MAX;

pub const DEFAULT_PHASE_TABLE: [[f64; 2]; 4] = [[0.0, 0.0], [PI, 0.0], [PI, PI], [0.0, PI]];

/// Timing, preparation and imperfection parameters of the pulse sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    /// Working-point free precession time (s).
    pub tau_wp: f64,
    pub pump_duration: f64,
    pub readout_window: f64,
    /// Duration of one full 4-Ramsey cycle (s).
    pub cycle_period: f64,
    /// Probability that optical pumping leaves the spin in `|+1>`.
    pub pump_fidelity: f64,
    /// Sub-ensembles as `(weight, area_scale)` pairs.
    pub rf_gradient: Vec<(f64, f64)>,
    pub phase_table: [[f64; 2]; 4],
    /// RF phase frame reference frequencies (Hz); zero means phases are
    /// re-synchronized at every pulse.
    pub frame_f1: f64,
    pub frame_f2: f64,
    pub t2_dq: f64,
    pub t2_sq: f64,
    /// Readouts averaged into each fringe point.
    pub averages: u64,
    /// Divide `R1 - R2 + R3 - R4` by four.
    pub normalize_by_four: bool,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            tau_wp: 1.428e-3,
            pump_duration: 300e-6,
            readout_window: 17e-6,
            cycle_period: 7e-3,
            pump_fidelity: 1.0,
            rf_gradient: vec![(1.0, 1.0)],
            phase_table: DEFAULT_PHASE_TABLE,
            frame_f1: 0.0,
            frame_f2: 0.0,
            t2_dq: 1.95e-3,
            t2_sq: 1.95e-3,
            averages: 1,
            normalize_by_four: false,
        }
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.tau_wp > 0.0, "tau_wp", "must be > 0")?;
        ensure(self.pump_duration > 0.0, "pump_duration", "must be > 0")?;
        ensure(self.readout_window > 0.0, "readout_window", "must be > 0")?;
        ensure(
            self.cycle_period > self.pump_duration + self.tau_wp,
            "cycle_period",
            "must exceed pump_duration + tau_wp",
        )?;
        ensure(
            (0.0..=1.0).contains(&self.pump_fidelity),
            "pump_fidelity",
            "must lie in [0, 1]",
        )?;
        ensure(!self.rf_gradient.is_empty(), "rf_gradient", "must not be empty")?;
        ensure(
            self.rf_gradient.iter().all(|&(w, s)| w >= 0.0 && s > 0.0),
            "rf_gradient",
            "weights must be >= 0 and scales > 0",
        )?;
        let total: f64 = self.rf_gradient.iter().map(|p| p.0).sum();
        ensure((total - 1.0).abs() < 1e-9, "rf_gradient", "weights must sum to 1")?;
        ensure(self.t2_dq > 0.0, "t2_dq", "must be > 0")?;
        ensure(self.t2_sq > 0.0, "t2_sq", "must be > 0")?;
        ensure(self.averages >= 1, "averages", "must be >= 1")?;
        for row in &self.phase_table {
            PulseSpec::dq(row[0], row[1]).validate()?;
        }
        Ok(())
    }

    /// Two equal-weight sub-ensembles with pulse areas scaled by `1 -+ spread`.
    pub fn with_rf_spread(mut self, spread: f64) -> Self {
        self.rf_gradient = vec![(0.5, 1.0 - spread), (0.5, 1.0 + spread)];
        self
    }

    pub fn frame(&self) -> RfFrame {
        RfFrame {
            f1_hz: self.frame_f1,
            f2_hz: self.frame_f2,
        }
    }

    pub fn dephasing(&self) -> Dephasing {
        Dephasing {
            t2_dq: self.t2_dq,
            t2_sq: self.t2_sq,
        }
    }

    /// Weight of a single Ramsey in the combined signal.
    pub fn combine_scale(&self) -> f64 {
        if self.normalize_by_four {
            0.25
        } else {
            1.0
        }
    }
}

/// Time-varying environment feeding a working-point stream.
pub trait EnvironmentSource {
    fn environment_at(&self, t: f64) -> FieldEnvironment;
}

impl EnvironmentSource for FieldEnvironment {
    fn environment_at(&self, _t: f64) -> FieldEnvironment {
        *self
    }
}

impl<F: Fn(f64) -> FieldEnvironment> EnvironmentSource for F {
    fn environment_at(&self, t: f64) -> FieldEnvironment {
        self(t)
    }
}

#[derive(Debug, Clone)]
struct SubEnsemble {
    weight: f64,
    area_scale: f64,
    /// State after pump, SQ pi and the first DQ pulse.
    prepared: SpinState,
    closing: [Mat3; 4],
}

/// Four Ramsey readouts and their phase-cycled combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourRamsey {
    pub singles: [f64; 4],
    pub combined: f64,
}

/// Output of a fringe sweep: the four single-Ramsey scans and their combination.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeSweep {
    pub taus: Vec<f64>,
    pub singles: [Vec<f64>; 4],
    pub combined: Vec<f64>,
    pub sigma_single: f64,
    pub sigma_combined: f64,
}

impl FringeSweep {
    fn series(&self, values: &[f64], sigma: f64) -> FringeSeries {
        FringeSeries {
            taus: self.taus.clone(),
            values: values.to_vec(),
            sigma: (sigma > 0.0).then(|| vec![sigma; self.taus.len()]),
        }
    }

    /// Single-Ramsey scan `k` (0-based); `sigma` is absent for noise-free sweeps.
    pub fn single_series(&self, k: usize) -> FringeSeries {
        self.series(&self.singles[k], self.sigma_single)
    }

    pub fn combined_series(&self) -> FringeSeries {
        self.series(&self.combined, self.sigma_combined)
    }
}

/// Pulse-sequence simulator with the pulse unitaries of every sub-ensemble
/// precomputed.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SequenceConfig,
    detector: DetectorConfig,
    constants: PhysicalConstants,
    noise: ExtraNoise,
    ensembles: Vec<SubEnsemble>,
}

impl Simulator {
    pub fn new(
        cfg: &SequenceConfig,
        detector: &DetectorConfig,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        cfg.validate()?;
        detector.validate()?;
        constants.validate()?;
        let ensembles = cfg
            .rf_gradient
            .iter()
            .map(|&(weight, area_scale)| {
                let sq = pulse_unitary(&PulseSpec::sq_pi_f1().with_area_scale(area_scale))?;
                let open = pulse_unitary(&PulseSpec::dq(0.0, 0.0).with_area_scale(area_scale))?;
                let prepared = SpinState::pumped(cfg.pump_fidelity)
                    .transformed(&sq)
                    .transformed(&open);
                let mut closing = [Mat3::identity(); 4];
                for (k, row) in cfg.phase_table.iter().enumerate() {
                    closing[k] =
                        pulse_unitary(&PulseSpec::dq(row[0], row[1]).with_area_scale(area_scale))?;
                }
                Ok(SubEnsemble {
                    weight,
                    area_scale,
                    prepared,
                    closing,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            detector: *detector,
            constants: *constants,
            noise: ExtraNoise::default(),
            ensembles,
        })
    }

    pub fn with_noise(mut self, noise: &ExtraNoise) -> Result<Self> {
        noise.validate()?;
        self.noise = *noise;
        Ok(self)
    }

    pub fn noise(&self) -> &ExtraNoise {
        &self.noise
    }

    pub fn config(&self) -> &SequenceConfig {
        &self.cfg
    }

    pub fn detector(&self) -> &DetectorConfig {
        &self.detector
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn precession(&self, env: &FieldEnvironment) -> Result<Precession> {
        env.validate()?;
        Precession::new(env, &self.constants, &self.cfg.frame(), self.cfg.dephasing())
    }

    /// Frequency at which the combined fringe oscillates in the configured frame (Hz).
    pub fn fringe_frequency(&self, env: &FieldEnvironment) -> Result<f64> {
        Ok(self.precession(env)?.dq_frequency())
    }

    /// Standard deviation of one single-Ramsey signal value averaged over
    /// `n` readouts: shot noise plus per-reading technical noise.
    pub fn single_sigma(&self, n: u64) -> Result<f64> {
        let shot = psn_fractional_uncertainty(&self.detector, 1, self.constants.q_e)?;
        Ok(shot.hypot(self.noise.per_reading) / (n as f64).sqrt())
    }

    fn combined_sigma(&self, single: f64) -> f64 {
        2.0 * single * self.cfg.combine_scale()
    }

    /// Noise-free fractional fluorescence `V / V0` for a closing pulse.
    fn mean_signal(&self, prec: &Precession, tau: f64, closing: impl Fn(&SubEnsemble) -> Mat3) -> f64 {
        let projection: f64 = self
            .ensembles
            .iter()
            .map(|e| {
                let evolved = prec.evolve(&e.prepared, tau);
                let p = evolved.transformed(&closing(e)).populations();
                e.weight * self.detector.projection(&p)
            })
            .sum();
        self.detector.mean_voltage(projection) / self.detector.v0
    }

    /// One DQ Ramsey with arbitrary second-pulse phases.
    pub fn ramsey(
        &self,
        env: &FieldEnvironment,
        tau: f64,
        phases: (f64, f64),
        rng: Option<&mut SimRng>,
    ) -> Result<f64> {
        ensure(tau >= 0.0, "tau", "must be >= 0")?;
        let prec = self.precession(env)?;
        let closing = self
            .ensembles
            .iter()
            .map(|e| pulse_unitary(&PulseSpec::dq(phases.0, phases.1).with_area_scale(e.area_scale)))
            .collect::<Result<Vec<_>>>()?;
        let mean = {
            let projection: f64 = self
                .ensembles
                .iter()
                .zip(&closing)
                .map(|(e, u)| {
                    let p = prec.evolve(&e.prepared, tau).transformed(u).populations();
                    e.weight * self.detector.projection(&p)
                })
                .sum();
            self.detector.mean_voltage(projection) / self.detector.v0
        };
        Ok(match rng {
            Some(rng) => mean + self.single_sigma(self.cfg.averages)? * gauss(rng),
            None => mean,
        })
    }

    /// The four phase-cycled Ramseys at one `tau`, each averaged over `n` readouts.
    pub fn four_ramsey_with(
        &self,
        prec: &Precession,
        tau: f64,
        n: u64,
        rng: Option<&mut SimRng>,
    ) -> Result<FourRamsey> {
        ensure(tau >= 0.0, "tau", "must be >= 0")?;
        let mut singles = [0.0; 4];
        for (k, s) in singles.iter_mut().enumerate() {
            *s = self.mean_signal(prec, tau, |e| e.closing[k]);
        }
        if let Some(rng) = rng {
            let sigma = self.single_sigma(n)?;
            for s in singles.iter_mut() {
                *s += sigma * gauss(rng);
            }
        }
        let combined =
            (singles[0] - singles[1] + singles[2] - singles[3]) * self.cfg.combine_scale();
        Ok(FourRamsey { singles, combined })
    }

    pub fn four_ramsey(
        &self,
        env: &FieldEnvironment,
        tau: f64,
        rng: Option<&mut SimRng>,
    ) -> Result<FourRamsey> {
        let prec = self.precession(env)?;
        self.four_ramsey_with(&prec, tau, self.cfg.averages, rng)
    }

    /// 4-Ramsey scan over `grid`. With a seed, point `i` draws its noise from
    /// stream `i` of the seeded generator, so the result does not depend on
    /// thread scheduling.
    pub fn sweep(&self, env: &FieldEnvironment, grid: &[f64], seed: Option<u64>) -> Result<FringeSweep> {
        ensure(!grid.is_empty(), "tau_grid", "must not be empty")?;
        ensure(
            grid.windows(2).all(|w| w[1] > w[0]),
            "tau_grid",
            "must be strictly increasing",
        )?;
        ensure(grid[0] >= 0.0, "tau_grid", "must be >= 0")?;
        let prec = self.precession(env)?;
        let n = self.cfg.averages;
        let points = grid
            .par_iter()
            .enumerate()
            .map(|(i, &tau)| match seed {
                Some(seed) => {
                    let mut rng = SimRng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    self.four_ramsey_with(&prec, tau, n, Some(&mut rng))
                }
                None => self.four_ramsey_with(&prec, tau, n, None),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut singles: [Vec<f64>; 4] = Default::default();
        for (k, col) in singles.iter_mut().enumerate() {
            *col = points.iter().map(|p| p.singles[k]).collect();
        }
        let sigma_single = if seed.is_some() { self.single_sigma(n)? } else { 0.0 };
        Ok(FringeSweep {
            taus: grid.to_vec(),
            singles,
            combined: points.iter().map(|p| p.combined).collect(),
            sigma_single,
            sigma_combined: self.combined_sigma(sigma_single),
        })
    }

    /// Working-point stream: one single-shot 4-Ramsey at `cfg.tau_wp` per cycle.
    /// The environment is sampled at each cycle start and held for the cycle.
    pub fn stream(
        &self,
        source: &dyn EnvironmentSource,
        duration: f64,
        seed: Option<u64>,
    ) -> Result<GyroTimeSeries> {
        ensure(duration > 0.0, "duration", "must be > 0")?;
        let noise = &self.noise;
        let period = self.cfg.cycle_period;
        let busy = 4.0 * (self.cfg.pump_duration + self.cfg.tau_wp);
        if busy > period {
            return Err(invalid(
                "cycle_period",
                format!("four pump + precession windows need {busy:.3e} s, cycle is {period:.3e} s"),
            ));
        }
        let n_cycles = (duration / period).floor() as usize;
        if n_cycles == 0 {
            return Err(Error::InsufficientSpan(format!(
                "duration {duration} s is shorter than one cycle ({period} s)"
            )));
        }
        let mut rng = seed.map(|seed| {
            let mut rng = SimRng::seed_from_u64(seed);
            rng.set_stream(GYRO_RNG_STREAM);
            rng
        });
        let white = noise.white_s / period.sqrt();
        let walk_step = noise.random_walk_s * period.sqrt();
        let mut drift = 0.0;
        let mut out = GyroTimeSeries {
            sigma: if seed.is_some() {
                self.combined_sigma(self.single_sigma(1)?)
            } else {
                0.0
            },
            meta: StreamMeta {
                tau_wp: self.cfg.tau_wp,
                cycle_period: period,
                seed,
                ..Default::default()
            },
            ..Default::default()
        };
        for k in 0..n_cycles {
            let t = k as f64 * period;
            let env = source.environment_at(t);
            let prec = self.precession(&env)?;
            let mut value = self
                .four_ramsey_with(&prec, self.cfg.tau_wp, 1, rng.as_mut())?
                .combined;
            if let Some(rng) = rng.as_mut() {
                if noise.white_s > 0.0 || noise.random_walk_s > 0.0 {
                    drift += walk_step * gauss(rng);
                    value += white * gauss(rng) + drift;
                }
            }
            out.t.push(t);
            out.signal.push(value);
            out.reference_rate_hz.push(env.nu_hz);
        }
        Ok(out)
    }

    /// Noise-free combined signal at the working point.
    pub fn working_point_signal(&self, env: &FieldEnvironment) -> Result<f64> {
        Ok(self.four_ramsey(env, self.cfg.tau_wp, None)?.combined)
    }

    /// Nearest zero crossing of the noise-free combined fringe to `tau_guess`
    /// whose signal increases with clockwise rotation.
    pub fn snap_working_point(&self, env: &FieldEnvironment, tau_guess: f64) -> Result<f64> {
        ensure(tau_guess > 0.0, "tau_guess", "must be > 0")?;
        let prec = self.precession(env)?;
        let f = prec.dq_frequency().abs();
        ensure(f > 0.0, "fringe_frequency", "must be nonzero to define a working point")?;
        let signal = |tau: f64, nu: f64| -> Result<f64> {
            let p = self.precession(&env.with_rotation(env.nu_hz + nu))?;
            Ok(self.four_ramsey_with(&p, tau, 1, None)?.combined)
        };
        let half = 0.5 / f;
        let k0 = (tau_guess / half - 0.5).round();
        let mut best: Option<f64> = None;
        for dk in [0.0, -1.0, 1.0, -2.0, 2.0] {
            let k = k0 + dk;
            if k < 0.0 {
                continue;
            }
            // bracket around the cosine null and refine by bisection
            let center = (k + 0.5) * half;
            let (mut lo, mut hi) = (center - 0.25 * half, center + 0.25 * half);
            let (mut s_lo, s_hi) = (signal(lo, 0.0)?, signal(hi, 0.0)?);
            if s_lo.signum() == s_hi.signum() {
                continue;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let s_mid = signal(mid, 0.0)?;
                if s_mid.signum() == s_lo.signum() {
                    lo = mid;
                    s_lo = s_mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            let dnu = 1e-3;
            if signal(root, dnu)? - signal(root, -dnu)? <= 0.0 {
                continue;
            }
            if best.is_none_or(|b| (root - tau_guess).abs() < (b - tau_guess).abs()) {
                best = Some(root);
            }
        }
        best.ok_or_else(|| invalid("tau_guess", "no rising zero crossing near the requested delay"))
    }
}

fn gauss(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

/// One DQ Ramsey sequence; deterministic when `rng` is `None`.
pub fn run_dq_ramsey(
    cfg: &SequenceConfig,
    detector: &DetectorConfig,
    env: &FieldEnvironment,
    c: &PhysicalConstants,
    tau: f64,
    second_pulse_phases: (f64, f64),
    rng: Option<&mut SimRng>,
) -> Result<f64> {
    Simulator::new(cfg, detector, c)?.ramsey(env, tau, second_pulse_phases, rng)
}

/// Phase-cycled combination `R1 - R2 + R3 - R4` at one `tau`.
pub fn run_4ramsey_point(
    cfg: &SequenceConfig,
    detector: &DetectorConfig,
    env: &FieldEnvironment,
    c: &PhysicalConstants,
    tau: f64,
    rng: Option<&mut SimRng>,
) -> Result<f64> {
    Ok(Simulator::new(cfg, detector, c)?.four_ramsey(env, tau, rng)?.combined)
}

/// Combined 4-Ramsey fringes over `tau_grid`.
pub fn sweep_fringes(
    cfg: &SequenceConfig,
    detector: &DetectorConfig,
    env: &FieldEnvironment,
    c: &PhysicalConstants,
    tau_grid: &[f64],
    noise: &ExtraNoise,
    seed: Option<u64>,
) -> Result<FringeSeries> {
    Ok(Simulator::new(cfg, detector, c)?
        .with_noise(noise)?
        .sweep(env, tau_grid, seed)?
        .combined_series())
}

/// Working-point stream driven by a time-varying environment.
pub fn run_gyro_stream(
    cfg: &SequenceConfig,
    detector: &DetectorConfig,
    source: &dyn EnvironmentSource,
    c: &PhysicalConstants,
    duration: f64,
    noise: &ExtraNoise,
    seed: Option<u64>,
) -> Result<GyroTimeSeries> {
    Simulator::new(cfg, detector, c)?
        .with_noise(noise)?
        .stream(source, duration, seed)
}

/// Evenly spaced grid of `n` points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}
