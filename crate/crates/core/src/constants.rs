//! Physical constants and the double-quantum splitting of the 14N ground-state manifold.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Relative size of `D^2 - (gamma_e B)^2` (with respect to `D^2`) below which the
/// hyperfine correction is treated as singular.
const ANTICROSSING_TOLERANCE: f64 = 1e-9;

/// Constants entering the 14N transition frequencies.
///
/// Field names in config files are exactly `gamma_e`, `gamma_n`, `D`, `A_perp`,
/// `Q` and `q_e`. Frequencies are in Hz, gyromagnetic ratios in Hz/G and the
/// elementary charge in A s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    pub gamma_e: f64,
    pub gamma_n: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "A_perp")]
    pub a_perp: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub q_e: f64,
}

impl PhysicalConstants {
    /// Literature values for the NV center and its 14N nucleus. `Q` is chosen so
    /// the carriers at 482 G land on 5.089 MHz and 4.796 MHz.
    pub const LITERATURE: PhysicalConstants = PhysicalConstants {
        gamma_e: 2.8025e6,
        gamma_n: 307.7,
        d: 2.870e9,
        a_perp: 2.62e6,
        q: 4.9425e6,
        q_e: 1.602_176_634e-19,
    };

    pub fn validate(&self) -> Result<()> {
        ensure(self.gamma_e > 0.0, "gamma_e", "must be > 0")?;
        ensure(self.gamma_n > 0.0, "gamma_n", "must be > 0")?;
        ensure(self.d > 0.0, "D", "must be > 0")?;
        ensure(self.q > 0.0, "Q", "must be > 0")?;
        ensure(self.q_e > 0.0, "q_e", "must be > 0")?;
        ensure(self.a_perp.is_finite(), "A_perp", "must be finite")?;
        ensure(
            self.gamma_e / self.gamma_n > 100.0,
            "gamma_e",
            "electron/nuclear gyromagnetic ratio must be large",
        )
    }

    /// Parses a constants profile from a key-value file. Keys may sit at the top
    /// level or inside a `[constants]` table; unset keys keep literature values.
    pub fn from_profile_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wrapped {
            constants: PhysicalConstants,
        }
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = if table.contains_key("constants") {
            toml::from_str::<Wrapped>(text).map(|w| w.constants)
        } else {
            toml::from_str::<PhysicalConstants>(text)
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        parsed.validate()?;
        Ok(parsed)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::LITERATURE
    }
}

/// Static and slowly varying environment seen by the nuclear spins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldEnvironment {
    /// Bias field along the NV axis (G).
    pub b_gauss: f64,
    /// Rotation rate about the NV axis (Hz, clockwise positive).
    pub nu_hz: f64,
    /// Quadrupole perturbation (Hz), e.g. from temperature drift.
    pub delta_q_hz: f64,
    /// Bias field drift (G).
    pub delta_b_gauss: f64,
}

impl FieldEnvironment {
    pub fn new(b_gauss: f64) -> Self {
        Self {
            b_gauss,
            nu_hz: 0.0,
            delta_q_hz: 0.0,
            delta_b_gauss: 0.0,
        }
    }

    pub fn with_rotation(mut self, nu_hz: f64) -> Self {
        self.nu_hz = nu_hz;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.b_gauss >= 0.0, "B", "must be >= 0")?;
        ensure(self.nu_hz.is_finite(), "nu", "must be finite")?;
        ensure(self.delta_q_hz.is_finite(), "delta_Q", "must be finite")?;
        ensure(self.delta_b_gauss.is_finite(), "delta_B", "must be finite")
    }
}

impl Default for FieldEnvironment {
    fn default() -> Self {
        Self::new(482.0)
    }
}

/// Splitting between `|m_I=+1>` and `|m_I=-1>` (Hz) at bias field `b_gauss`,
/// including the second-order transverse hyperfine correction.
pub fn dq_splitting(b_gauss: f64, c: &PhysicalConstants) -> Result<f64> {
    if !(b_gauss >= 0.0) {
        return Err(crate::error::invalid("B", "must be >= 0"));
    }
    let zeeman_e = c.gamma_e * b_gauss;
    let denom = c.d * c.d - zeeman_e * zeeman_e;
    if denom.abs() < ANTICROSSING_TOLERANCE * c.d * c.d {
        return Err(Error::SingularDenominator { b_gauss });
    }
    let correction = (c.gamma_e / c.gamma_n) * c.a_perp * c.a_perp / denom;
    Ok(2.0 * b_gauss * c.gamma_n * (1.0 - correction))
}

/// Carrier frequencies `(f1, f2)` of the `|+1> <-> |0>` and `|0> <-> |-1>`
/// transitions. Both share the quadrupole term; their difference is the
/// double-quantum splitting at `B + delta_B`.
pub fn transition_frequencies(env: &FieldEnvironment, c: &PhysicalConstants) -> Result<(f64, f64)> {
    let f_dq = dq_splitting(env.b_gauss + env.delta_b_gauss, c)?;
    let center = c.q + env.delta_q_hz;
    Ok((center + 0.5 * f_dq, center - 0.5 * f_dq))
}
