//! Fringe fitting, spectra, calibration, Allan deviation, working-point
//! selection and dynamic-range budgets.

pub mod allan;
pub mod calibration;
pub mod fit;
pub mod linearity;
pub mod regression;
pub mod spectrum;
pub mod working_point;

pub use allan::{allan_deviation, bias_stability, log_log_slope, white_noise_density};
pub use calibration::{
    calibration_from_amplitude, calibration_from_fringes, calibration_from_rotation_sweep,
    calibration_from_slope, rotation_from_signal, Calibration,
};
pub use fit::{fit_decaying_sine, FringeFit};
pub use linearity::{dynamic_range, dynamic_range_exact, linearity, phase_wrap_rate, DynamicRange};
pub use regression::{linear_regression, LinearFit};
pub use spectrum::{power_spectrum, uniform_step, Spectrum};
pub use working_point::{select_working_point, snap_to_cosine_null, time_optimal_delay, WorkingPoint};
