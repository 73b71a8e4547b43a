//! Simulation and analysis toolkit for a diamond 14N nuclear-spin gyroscope.
//!
//! The crate covers the spin-1 nuclear dynamics, the double-quantum 4-Ramsey
//! pulse sequence, optical readout with photon shot noise, a rate-table model
//! and the analysis chain (fringe fits, calibration, Allan deviation, budgets).

pub mod analysis;
pub mod config;
pub mod constants;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod sequence;
pub mod series;
pub mod spin;
pub mod table;
pub mod units;

pub use constants::{dq_splitting, transition_frequencies, FieldEnvironment, PhysicalConstants};
pub use detector::{
    normalize_contrast, photoelectron_count, psn_fractional_uncertainty, psn_rotation_sensitivity,
    readout_voltage, readout_voltage_averaged, DetectorConfig, ExtraNoise, Sensitivity,
};
pub use error::{Error, Result};
pub use sequence::{
    linspace, run_4ramsey_point, run_dq_ramsey, run_gyro_stream, sweep_fringes, EnvironmentSource,
    FourRamsey, FringeSweep, SequenceConfig, SimRng, Simulator,
};
pub use series::{AllanSeries, FringeSeries, GyroTimeSeries, StreamMeta};
pub use spin::{
    evolve_free, populations, pulse_unitary, Dephasing, Level, Populations, Precession, PulseKind,
    PulseSpec, RfFrame, SpinState,
};
pub use table::{
    jog, run_profile, run_profile_with, step, Instruction, RateTimeline, RotationProfile,
    TableConfig, TableEnvironment, TableState, TelemetrySample,
};
pub use config::{EnvironmentConfig, ExperimentConfig, FringeGrid, GyroConfig, NoiseConfig, RunConfig};
pub use experiment::{
    budget, calibrate, run_allan, run_fringes, run_gyro, AllanExperiment, Budget,
    FringeExperiment, GyroCalibration, GyroExperiment,
};
