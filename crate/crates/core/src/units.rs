//! Unit conversions used at I/O boundaries. Internally every rate is in Hz.

/// Degrees per second per Hz of rotation (one full turn is 360 degrees).
pub const DPS_PER_HZ: f64 = 360.0;

pub fn hz_to_dps(hz: f64) -> f64 {
    hz * DPS_PER_HZ
}

pub fn dps_to_hz(dps: f64) -> f64 {
    dps / DPS_PER_HZ
}

/// Fractional signal to percent.
pub fn to_percent(x: f64) -> f64 {
    x * 100.0
}

pub fn from_percent(p: f64) -> f64 {
    p / 100.0
}
