//! Rotation platform: velocity setpoints with linear acceleration ramps,
//! instruction programs and periodic telemetry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::FieldEnvironment;
use crate::error::{ensure, invalid, Error, Result};
use crate::sequence::EnvironmentSource;
use crate::units::dps_to_hz;

pub const DEFAULT_RATE_LIMIT_DPS: f64 = 400.0;
pub const DEFAULT_POLL_S: f64 = 30e-3;
const TELEMETRY_RNG_STREAM: u64 = u64::MAX - 1;

/// Platform limits and servo model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableConfig {
    pub rate_limit_dps: f64,
    /// First-order servo lag time constant (s); zero tracks the ramp exactly.
    pub lag_s: f64,
    pub poll_s: f64,
    /// Full width of uniform timestamp jitter on telemetry (s).
    pub jitter_s: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            rate_limit_dps: DEFAULT_RATE_LIMIT_DPS,
            lag_s: 0.0,
            poll_s: DEFAULT_POLL_S,
            jitter_s: 0.0,
        }
    }
}

impl TableConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.rate_limit_dps > 0.0, "rate_limit_dps", "must be > 0")?;
        ensure(self.lag_s >= 0.0, "lag_s", "must be >= 0")?;
        ensure(self.poll_s > 0.0, "poll_s", "must be > 0")?;
        ensure(
            (0.0..self.poll_s).contains(&self.jitter_s),
            "jitter_s",
            "must lie in [0, poll_s)",
        )
    }
}

/// Instantaneous platform state. Angles in degrees, rates in °/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableState {
    pub t: f64,
    pub angle: f64,
    /// Actual rate; equals `command` unless a servo lag is configured.
    pub rate: f64,
    /// Ramped rate command.
    pub command: f64,
    pub rate_setpoint: f64,
    /// Ramp acceleration magnitude (°/s²).
    pub accel: f64,
    pub rate_limit: f64,
    pub lag: f64,
}

impl TableState {
    pub fn at_rest(accel: f64, cfg: &TableConfig) -> Result<Self> {
        ensure(accel > 0.0, "accel", "must be > 0")?;
        cfg.validate()?;
        Ok(Self {
            t: 0.0,
            angle: 0.0,
            rate: 0.0,
            command: 0.0,
            rate_setpoint: 0.0,
            accel,
            rate_limit: cfg.rate_limit_dps,
            lag: cfg.lag_s,
        })
    }

    /// Signed acceleration of the rate command at this instant.
    pub fn ramp_accel(&self) -> f64 {
        let gap = self.rate_setpoint - self.command;
        if gap == 0.0 {
            0.0
        } else {
            gap.signum() * self.accel
        }
    }

    /// Signed acceleration of the actual rate.
    pub fn actual_accel(&self) -> f64 {
        if self.lag > 0.0 {
            (self.command - self.rate) / self.lag
        } else {
            self.ramp_accel()
        }
    }
}

/// Sets a new rate setpoint; subsequent steps ramp toward it. Setpoints beyond
/// the rate limit are clamped to it.
pub fn jog(state: &TableState, new_setpoint: f64) -> TableState {
    TableState {
        rate_setpoint: new_setpoint.clamp(-state.rate_limit, state.rate_limit),
        ..*state
    }
}

/// Advances the platform by `dt`. The rate command ramps at `accel` and
/// clamps at the setpoint; the angle is the exact integral of the rate.
pub fn step(state: &TableState, dt: f64) -> Result<TableState> {
    ensure(dt > 0.0 && dt.is_finite(), "dt", "must be > 0")?;
    let mut s = *state;
    let a = s.ramp_accel();
    let ramp_left = if a == 0.0 {
        0.0
    } else {
        (s.rate_setpoint - s.command).abs() / s.accel
    };
    if ramp_left >= dt {
        advance_linear(&mut s, a, dt);
    } else {
        if ramp_left > 0.0 {
            advance_linear(&mut s, a, ramp_left);
        }
        s.command = s.rate_setpoint;
        advance_linear(&mut s, 0.0, dt - ramp_left);
    }
    s.t = state.t + dt;
    Ok(s)
}

/// Advances with the command changing at constant slope `k` for `dt`.
fn advance_linear(s: &mut TableState, k: f64, dt: f64) {
    if dt <= 0.0 {
        return;
    }
    let c0 = s.command;
    if s.lag > 0.0 {
        // r(t) = c(t) - k tau + (r0 - c0 + k tau) e^{-t/tau}
        let tau = s.lag;
        let lead = s.rate - c0 + k * tau;
        let decay = (-dt / tau).exp();
        s.angle += c0 * dt + 0.5 * k * dt * dt - k * tau * dt + lead * tau * (-(-dt / tau).exp_m1());
        s.rate = c0 + k * dt - k * tau + lead * decay;
    } else {
        s.angle += c0 * dt + 0.5 * k * dt * dt;
        s.rate = c0 + k * dt;
    }
    s.command = c0 + k * dt;
    s.t += dt;
}

/// One program line: jog to `rate_dps` with ramp `accel_dps2`, then run for `duration_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instruction {
    pub duration_s: f64,
    pub rate_dps: f64,
    pub accel_dps2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RotationProfile {
    pub instructions: Vec<Instruction>,
}

impl RotationProfile {
    pub fn new(instructions: Vec<Instruction>) -> Result<Self> {
        let p = Self { instructions };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, ins) in self.instructions.iter().enumerate() {
            if !(ins.duration_s > 0.0 && ins.duration_s.is_finite()) {
                return Err(invalid("duration_s", format!("instruction {i}: must be > 0")));
            }
            if !(ins.accel_dps2 > 0.0 && ins.accel_dps2.is_finite()) {
                return Err(invalid("accel_dps2", format!("instruction {i}: must be > 0")));
            }
            if !ins.rate_dps.is_finite() {
                return Err(invalid("rate_dps", format!("instruction {i}: must be finite")));
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.instructions.iter().map(|i| i.duration_s).sum()
    }

    /// Parses a CSV profile with header `duration_s,rate_dps,accel_dps2`.
    /// Lines starting with `#` are comments.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Config(format!("profile header: {e}")))?
            .clone();
        let expected = ["duration_s", "rate_dps", "accel_dps2"];
        if headers.iter().ne(expected) {
            return Err(Error::Config(format!(
                "profile header must be {}, found {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let instructions = reader
            .deserialize()
            .enumerate()
            .map(|(i, row)| row.map_err(|e| Error::Config(format!("profile row {}: {e}", i + 1))))
            .collect::<Result<Vec<Instruction>>>()?;
        Self::new(instructions)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("duration_s,rate_dps,accel_dps2\n");
        for i in &self.instructions {
            out.push_str(&format!("{},{},{}\n", i.duration_s, i.rate_dps, i.accel_dps2));
        }
        out
    }

    /// Linear sweep 0 -> +peak -> -peak -> 0 at constant `accel`.
    pub fn triangle_sweep(peak_dps: f64, accel_dps2: f64) -> Result<Self> {
        ensure(peak_dps > 0.0, "peak_dps", "must be > 0")?;
        let leg = peak_dps / accel_dps2;
        Self::new(vec![
            Instruction {
                duration_s: leg,
                rate_dps: peak_dps,
                accel_dps2,
            },
            Instruction {
                duration_s: 2.0 * leg,
                rate_dps: -peak_dps,
                accel_dps2,
            },
            Instruction {
                duration_s: leg,
                rate_dps: 0.0,
                accel_dps2,
            },
        ])
    }

    /// Holds at rest for `duration_s`.
    pub fn hold(duration_s: f64) -> Result<Self> {
        Self::new(vec![Instruction {
            duration_s,
            rate_dps: 0.0,
            accel_dps2: 1.0,
        }])
    }
}

/// Continuous-time evaluator of a rotation program. Read-only once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTimeline {
    /// State at the start of each instruction, after the jog.
    starts: Vec<TableState>,
    end: TableState,
}

impl RateTimeline {
    pub fn new(profile: &RotationProfile, cfg: &TableConfig) -> Result<Self> {
        profile.validate()?;
        let accel0 = profile.instructions.first().map_or(1.0, |i| i.accel_dps2);
        let mut state = TableState::at_rest(accel0, cfg)?;
        let mut starts = Vec::with_capacity(profile.instructions.len());
        for ins in &profile.instructions {
            state.accel = ins.accel_dps2;
            state = jog(&state, ins.rate_dps);
            starts.push(state);
            state = step(&state, ins.duration_s)?;
        }
        Ok(Self { starts, end: state })
    }

    pub fn duration(&self) -> f64 {
        self.end.t
    }

    /// Platform state at time `t`, clamped to the program span.
    pub fn state_at(&self, t: f64) -> TableState {
        if self.starts.is_empty() || t <= 0.0 {
            return self.starts.first().copied().unwrap_or(self.end);
        }
        if t >= self.end.t {
            return self.end;
        }
        let k = self.starts.partition_point(|s| s.t <= t) - 1;
        let start = self.starts[k];
        let dt = t - start.t;
        if dt > 0.0 {
            step(&start, dt).unwrap_or(start)
        } else {
            start
        }
    }

    pub fn rate_dps(&self, t: f64) -> f64 {
        self.state_at(t).rate
    }
}

/// One telemetry record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub t: f64,
    pub angle_deg: f64,
    pub rate_dps: f64,
    pub accel_dps2: f64,
}

/// Executes `profile` and polls the platform every `cfg.poll_s` from zero
/// through the end of the program.
pub fn run_profile_with(
    profile: &RotationProfile,
    cfg: &TableConfig,
    seed: Option<u64>,
) -> Result<Vec<TelemetrySample>> {
    let timeline = RateTimeline::new(profile, cfg)?;
    let n = (timeline.duration() / cfg.poll_s + 1e-9).floor() as usize + 1;
    let mut rng = seed.map(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(TELEMETRY_RNG_STREAM);
        rng
    });
    Ok((0..n)
        .map(|k| {
            let nominal = k as f64 * cfg.poll_s;
            let t = match rng.as_mut() {
                Some(rng) if cfg.jitter_s > 0.0 => {
                    nominal + cfg.jitter_s * (rng.random::<f64>() - 0.5)
                }
                _ => nominal,
            };
            let s = timeline.state_at(t);
            TelemetrySample {
                t,
                angle_deg: s.angle,
                rate_dps: s.rate,
                accel_dps2: s.actual_accel(),
            }
        })
        .collect())
}

/// Jitter-free telemetry with the default platform at poll interval `poll`.
pub fn run_profile(profile: &RotationProfile, poll: f64) -> Result<Vec<TelemetrySample>> {
    let cfg = TableConfig {
        poll_s: poll,
        ..TableConfig::default()
    };
    run_profile_with(profile, &cfg, None)
}

/// Supplies the platform rotation to a working-point stream.
#[derive(Debug, Clone)]
pub struct TableEnvironment {
    pub base: FieldEnvironment,
    pub timeline: RateTimeline,
}

impl EnvironmentSource for TableEnvironment {
    fn environment_at(&self, t: f64) -> FieldEnvironment {
        self.base
            .with_rotation(self.base.nu_hz + dps_to_hz(self.timeline.rate_dps(t)))
    }
}
