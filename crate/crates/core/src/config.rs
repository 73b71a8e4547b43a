//! Experiment configuration: one TOML document with a section per module.
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::constants::{FieldEnvironment, PhysicalConstants};
use crate::detector::{DetectorConfig, ExtraNoise};
use crate::error::{ensure, invalid, Error, Result};
use crate::sequence::{linspace, SequenceConfig};
use crate::table::TableConfig;
use crate::units::dps_to_hz;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentConfig {
    #[serde(rename = "B")]
    pub b_gauss: f64,
    /// Constant rotation added to any table motion (°/s).
    pub rotation_dps: f64,
    #[serde(rename = "delta_Q")]
    pub delta_q_hz: f64,
    #[serde(rename = "delta_B")]
    pub delta_b_gauss: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            b_gauss: 482.0,
            rotation_dps: 0.0,
            delta_q_hz: 0.0,
            delta_b_gauss: 0.0,
        }
    }
}

impl EnvironmentConfig {
    pub fn field(&self) -> FieldEnvironment {
        FieldEnvironment {
            b_gauss: self.b_gauss,
            nu_hz: dps_to_hz(self.rotation_dps),
            delta_q_hz: self.delta_q_hz,
            delta_b_gauss: self.delta_b_gauss,
        }
    }
}

/// Technical noise plus an optional total white-noise target for streams.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub white_s: f64,
    pub random_walk_s: f64,
    pub per_reading: f64,
    /// Total angle random walk of a stream (Hz/sqrt(Hz)); when set, `white_s`
    /// is derived from it and must be left at zero.
    pub target_arw_hz: Option<f64>,
}

impl NoiseConfig {
    pub fn extra(&self) -> ExtraNoise {
        ExtraNoise {
            white_s: self.white_s,
            random_walk_s: self.random_walk_s,
            per_reading: self.per_reading,
        }
    }

    /// Extra noise with `white_s` chosen so the stream's white rotation noise
    /// reaches `target_arw_hz`, given calibration `alpha_per_hz` and the
    /// rotation noise density the stream already has.
    pub fn resolve(&self, alpha_per_hz: f64, existing_arw_hz: f64) -> Result<ExtraNoise> {
        let mut extra = self.extra();
        if let Some(target) = self.target_arw_hz {
            if target < existing_arw_hz {
                return Err(invalid(
                    "target_arw_hz",
                    format!("{target:.4e} Hz/rtHz is below the shot-noise level {existing_arw_hz:.4e}"),
                ));
            }
            extra.white_s = alpha_per_hz.abs() * (target * target - existing_arw_hz * existing_arw_hz).sqrt();
        }
        Ok(extra)
    }

    pub fn validate(&self) -> Result<()> {
        self.extra().validate()?;
        if let Some(t) = self.target_arw_hz {
            ensure(t > 0.0, "target_arw_hz", "must be > 0")?;
            ensure(self.white_s == 0.0, "white_s", "must be 0 when target_arw_hz is set")?;
        }
        Ok(())
    }
}

/// Delay grid of a fringe sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FringeGrid {
    pub tau_start: f64,
    pub tau_stop: f64,
    pub points: usize,
}

impl Default for FringeGrid {
    fn default() -> Self {
        Self {
            tau_start: 0.0,
            tau_stop: 5e-3,
            points: 62_501,
        }
    }
}

impl FringeGrid {
    pub fn validate(&self) -> Result<()> {
        ensure(self.tau_start >= 0.0, "tau_start", "must be >= 0")?;
        ensure(self.tau_stop > self.tau_start, "tau_stop", "must exceed tau_start")?;
        ensure(self.points >= 2, "points", "must be >= 2")
    }

    pub fn taus(&self) -> Vec<f64> {
        linspace(self.tau_start, self.tau_stop, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GyroConfig {
    /// Move `tau_wp` to the nearest rising zero crossing of the combined fringe.
    pub snap_working_point: bool,
}

impl Default for GyroConfig {
    fn default() -> Self {
        Self {
            snap_working_point: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub constants: PhysicalConstants,
    pub environment: EnvironmentConfig,
    pub sequence: SequenceConfig,
    pub detector: DetectorConfig,
    pub noise: NoiseConfig,
    pub table: TableConfig,
    pub fringes: FringeGrid,
    pub gyro: GyroConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Parses and validates a TOML document. Parse errors carry the line,
    /// column and offending key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.environment.field().validate()?;
        self.sequence.validate()?;
        self.detector.validate()?;
        self.noise.validate()?;
        self.table.validate()?;
        self.fringes.validate()?;
        ensure(
            self.detector.t_r <= self.sequence.pump_duration,
            "t_r",
            "must not exceed pump_duration",
        )
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
