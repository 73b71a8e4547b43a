use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::units::hz_to_dps;

/// Phase-wrap scale `1 / (4 pi tau)` (Hz) for free-precession time `tau`.
pub fn phase_wrap_rate(tau: f64) -> Result<f64> {
    ensure(tau > 0.0, "tau", "must be > 0")?;
    Ok(1.0 / (4.0 * PI * tau))
}

/// Measured rate `nu0 sin(nu / nu0)` and fractional deviation `(nu - nu_meas) / nu`.
pub fn linearity(nu: f64, nu0: f64) -> Result<(f64, f64)> {
    ensure(nu0 > 0.0, "nu0", "must be > 0")?;
    let meas = nu0 * (nu / nu0).sin();
    let eps = if nu == 0.0 { 0.0 } else { (nu - meas) / nu };
    Ok((meas, eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicRange {
    pub hz: f64,
    pub dps: f64,
}

/// Half-width `nu0 sqrt(6 eps)` of the rate span over which the leading-order
/// nonlinearity stays below `eps`.
pub fn dynamic_range(epsilon: f64, nu0: f64) -> Result<DynamicRange> {
    ensure((0.0..0.1).contains(&epsilon), "epsilon", "must lie in [0, 0.1)")?;
    ensure(nu0 > 0.0, "nu0", "must be > 0")?;
    let hz = nu0 * (6.0 * epsilon).sqrt();
    Ok(DynamicRange {
        hz,
        dps: hz_to_dps(hz),
    })
}

/// Rate at which `1 - sin(x) / x` reaches `epsilon` exactly, by bisection.
pub fn dynamic_range_exact(epsilon: f64, nu0: f64) -> Result<DynamicRange> {
    let approx = dynamic_range(epsilon, nu0)?;
    if epsilon == 0.0 {
        return Ok(approx);
    }
    let deviation = |x: f64| 1.0 - x.sin() / x;
    let (mut lo, mut hi) = (0.0, 2.0 * (6.0 * epsilon).sqrt());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if deviation(mid) < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let hz = nu0 * 0.5 * (lo + hi);
    Ok(DynamicRange {
        hz,
        dps: hz_to_dps(hz),
    })
}
