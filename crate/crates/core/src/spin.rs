//! Spin-1 density matrices over the 14N `m_I` manifold, hard RF pulses and free
//! precession in the RF phase frame.
//!
//! Basis order is `(m_I = +1, 0, -1)`. Level energies are measured from `|0>`:
//! `|+1>` sits `f1` above it and `|-1>` sits `f2` above it, so the
//! `<+1|rho|-1>` coherence precesses at `f1 - f2`. Rotation about the NV axis
//! shifts `|+1>` by `+nu` and `|-1>` by `-nu`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{transition_frequencies, FieldEnvironment, PhysicalConstants};
use crate::error::{ensure, invalid, Result};

pub type C64 = Complex64;
pub type Mat3 = Matrix3<C64>;

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Plus = 0,
    Zero = 1,
    Minus = 2,
}

/// Diagonal of a density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub plus: f64,
    pub zero: f64,
    pub minus: f64,
}

impl Populations {
    pub fn as_array(&self) -> [f64; 3] {
        [self.plus, self.zero, self.minus]
    }

    pub fn sum(&self) -> f64 {
        self.plus + self.zero + self.minus
    }
}

/// A 3x3 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    rho: Mat3,
}

impl SpinState {
    pub fn pure(level: Level) -> Self {
        let mut rho = Mat3::zeros();
        rho[(level as usize, level as usize)] = C64::new(1.0, 0.0);
        Self { rho }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Mat3::identity() * C64::new(1.0 / 3.0, 0.0),
        }
    }

    /// Optical pumping modeled as a classical reset: weight `fidelity` in
    /// `|+1>`, the remainder spread evenly over `|0>` and `|-1>`.
    pub fn pumped(fidelity: f64) -> Self {
        let rest = 0.5 * (1.0 - fidelity);
        Self {
            rho: Mat3::from_diagonal(&nalgebra::Vector3::new(
                C64::new(fidelity, 0.0),
                C64::new(rest, 0.0),
                C64::new(rest, 0.0),
            )),
        }
    }

    /// Wraps a matrix after checking Hermiticity, unit trace and positivity.
    pub fn from_matrix(rho: Mat3) -> Result<Self> {
        let state = Self { rho };
        ensure(state.hermiticity_error() < 1e-12, "rho", "not Hermitian")?;
        ensure((state.trace() - 1.0).abs() < 1e-12, "rho", "trace differs from 1")?;
        let eig = rho.symmetric_eigenvalues();
        ensure(
            eig.iter().all(|&e| e >= -1e-10),
            "rho",
            "has a negative eigenvalue",
        )?;
        Ok(state)
    }

    pub fn rho(&self) -> &Mat3 {
        &self.rho
    }

    pub fn element(&self, row: Level, col: Level) -> C64 {
        self.rho[(row as usize, col as usize)]
    }

    /// The double-quantum coherence `<+1|rho|-1>`.
    pub fn dq_coherence(&self) -> C64 {
        self.element(Level::Plus, Level::Minus)
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.rho - self.rho.adjoint()).norm()
    }

    pub fn populations(&self) -> Populations {
        Populations {
            plus: self.rho[(0, 0)].re,
            zero: self.rho[(1, 1)].re,
            minus: self.rho[(2, 2)].re,
        }
    }

    /// `U rho U^dagger`.
    pub fn transformed(&self, u: &Mat3) -> Self {
        Self {
            rho: u * self.rho * u.adjoint(),
        }
    }
}

/// Populations of a state; free-function form of [`SpinState::populations`].
pub fn populations(s: &SpinState) -> Populations {
    s.populations()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseKind {
    /// Single-tone pi pulse on the `|+1> <-> |0>` transition.
    SqPiF1,
    /// Simultaneous two-tone pulse with area pi/sqrt(2) on each tone.
    DqTwoTone,
}

/// An instantaneous RF pulse. `area_scale` multiplies the nominal rotation angle
/// of every tone (RF amplitude gradients make it differ from 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub phase_f1: f64,
    pub phase_f2: f64,
    pub area_scale: f64,
}

impl PulseSpec {
    pub fn sq_pi_f1() -> Self {
        Self {
            kind: PulseKind::SqPiF1,
            phase_f1: 0.0,
            phase_f2: 0.0,
            area_scale: 1.0,
        }
    }

    pub fn dq(phase_f1: f64, phase_f2: f64) -> Self {
        Self {
            kind: PulseKind::DqTwoTone,
            phase_f1,
            phase_f2,
            area_scale: 1.0,
        }
    }

    pub fn with_area_scale(mut self, area_scale: f64) -> Self {
        self.area_scale = area_scale;
        self
    }

    /// Rotation angle of each tone for an ideal pulse.
    pub fn nominal_angle(&self) -> f64 {
        match self.kind {
            PulseKind::SqPiF1 => PI,
            PulseKind::DqTwoTone => PI * FRAC_1_SQRT_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.area_scale > 0.0 && self.area_scale.is_finite(),
            "area_scale",
            "must be > 0",
        )?;
        for (name, phase) in [("phase_f1", self.phase_f1), ("phase_f2", self.phase_f2)] {
            if !(0.0..TAU).contains(&phase) {
                return Err(invalid(name, format!("{phase} is outside [0, 2pi)")));
            }
        }
        Ok(())
    }
}

/// Unitary of a hard pulse, `exp(-i H)` with `H` the rotating-wave drive
/// integrated over the pulse. Tone 1 couples `|+1>` and `|0>`, tone 2 couples
/// `|0>` and `|-1>`; a rotation angle `theta` on one tone corresponds to a
/// coupling `theta / 2`.
pub fn pulse_unitary(p: &PulseSpec) -> Result<Mat3> {
    p.validate()?;
    let half = 0.5 * p.area_scale * p.nominal_angle();
    let mut h = Mat3::zeros();
    let c1 = C64::from_polar(half, -p.phase_f1);
    h[(0, 1)] = c1;
    h[(1, 0)] = c1.conj();
    if p.kind == PulseKind::DqTwoTone {
        let c2 = C64::from_polar(half, -p.phase_f2);
        h[(2, 1)] = c2;
        h[(1, 2)] = c2.conj();
    }
    Ok((h * C64::new(0.0, -1.0)).exp())
}

/// Reference frequencies of the RF phase frame.
///
/// Free precession phases are accumulated relative to these. Continuous
/// synthesizers at the carrier frequencies give a near-resonant frame where
/// fringes oscillate at the detuning. Pulses whose phase is re-synchronized at
/// each pulse start correspond to a zero-frequency frame, where fringes
/// oscillate at the full transition frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfFrame {
    pub f1_hz: f64,
    pub f2_hz: f64,
}

impl RfFrame {
    pub const PULSE_SYNCHRONIZED: RfFrame = RfFrame {
        f1_hz: 0.0,
        f2_hz: 0.0,
    };

    /// Frame locked to the unperturbed carriers of `env` (zero detuning).
    pub fn resonant(env: &FieldEnvironment, c: &PhysicalConstants) -> Result<Self> {
        let (f1_hz, f2_hz) = transition_frequencies(env, c)?;
        Ok(Self { f1_hz, f2_hz })
    }
}

impl Default for RfFrame {
    fn default() -> Self {
        Self::PULSE_SYNCHRONIZED
    }
}

/// Phenomenological exponential decay of coherences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dephasing {
    pub t2_dq: f64,
    pub t2_sq: f64,
}

impl Dephasing {
    pub fn uniform(t2: f64) -> Self {
        Self { t2_dq: t2, t2_sq: t2 }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.t2_dq > 0.0, "t2_dq", "must be > 0")?;
        ensure(self.t2_sq > 0.0, "t2_sq", "must be > 0")
    }
}

impl Default for Dephasing {
    fn default() -> Self {
        Self::uniform(1.95e-3)
    }
}

/// Free evolution for one environment, with level frequencies precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Precession {
    /// Frame-relative level frequencies of `|+1>, |0>, |-1>` (Hz).
    levels: [f64; 3],
    dephasing: Dephasing,
}

impl Precession {
    pub fn new(
        env: &FieldEnvironment,
        c: &PhysicalConstants,
        frame: &RfFrame,
        dephasing: Dephasing,
    ) -> Result<Self> {
        dephasing.validate()?;
        let (f1, f2) = transition_frequencies(env, c)?;
        Ok(Self {
            levels: [f1 + env.nu_hz - frame.f1_hz, 0.0, f2 - env.nu_hz - frame.f2_hz],
            dephasing,
        })
    }

    /// Precession frequency of `<+1|rho|-1>` in the frame (Hz).
    pub fn dq_frequency(&self) -> f64 {
        self.levels[0] - self.levels[2]
    }

    /// Precession frequencies of `<+1|rho|0>` and `<-1|rho|0>` (Hz).
    pub fn sq_frequencies(&self) -> (f64, f64) {
        (self.levels[0], self.levels[2])
    }

    pub fn evolve(&self, s: &SpinState, tau: f64) -> SpinState {
        let mut rho = s.rho;
        let sq = (-tau / self.dephasing.t2_sq).exp();
        let dq = (-tau / self.dephasing.t2_dq).exp();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let decay = if i == 0 && j == 2 { dq } else { sq };
                let phase = -TAU * (self.levels[i] - self.levels[j]) * tau;
                let f = C64::from_polar(decay, phase);
                rho[(i, j)] *= f;
                rho[(j, i)] = rho[(i, j)].conj();
            }
        }
        SpinState { rho }
    }
}

/// Free precession for `tau` seconds in `frame`.
pub fn evolve_free(
    s: &SpinState,
    tau: f64,
    env: &FieldEnvironment,
    c: &PhysicalConstants,
    frame: &RfFrame,
    dephasing: Dephasing,
) -> Result<SpinState> {
    ensure(tau >= 0.0, "tau", "must be >= 0")?;
    Ok(Precession::new(env, c, frame, dephasing)?.evolve(s, tau))
}
