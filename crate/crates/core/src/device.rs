//! Single magnetic tunnel junction: binary state, read conductance and
//! stochastic spin-transfer-torque switching.
//!
//! Conductances are normalized so that the anti-parallel state reads as
//! `g_ap` (1.0 by default). All functions here are pure; randomness enters
//! only through explicit draw arguments.

use crate::error::{Error, Result};

/// Binary MTJ state. There is no intermediate value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MtjState {
    /// Anti-parallel: low conductance.
    AntiParallel,
    /// Parallel: high conductance.
    Parallel,
}

impl MtjState {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            MtjState::Parallel
        } else {
            MtjState::AntiParallel
        }
    }

    /// `true` for the parallel state, matching the packed representation.
    pub fn bit(self) -> bool {
        matches!(self, MtjState::Parallel)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviceParams {
    /// Normalized anti-parallel conductance.
    pub g_ap: f64,
    /// On/off ratio `G_P / G_AP`.
    pub ratio_rho: f64,
    /// Relative standard deviation of multiplicative read noise.
    pub read_noise_sigma: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            g_ap: 1.0,
            ratio_rho: 1.9,
            read_noise_sigma: 0.0,
        }
    }
}

/// Smallest conductance a noisy read may return.
const MIN_NOISY_CONDUCTANCE: f64 = 1e-12;

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_ap > 0.0 && self.g_ap.is_finite()) {
            return Err(Error::config("device", format!("g_ap must be > 0, got {}", self.g_ap)));
        }
        if !(self.ratio_rho > 1.0 && self.ratio_rho.is_finite()) {
            return Err(Error::config(
                "device",
                format!("ratio_rho must be > 1, got {}", self.ratio_rho),
            ));
        }
        if !(self.read_noise_sigma >= 0.0 && self.read_noise_sigma.is_finite()) {
            return Err(Error::config(
                "device",
                format!("read_noise_sigma must be >= 0, got {}", self.read_noise_sigma),
            ));
        }
        Ok(())
    }

    pub fn g_p(&self) -> f64 {
        self.g_ap * self.ratio_rho
    }

    /// Read conductance of a device in `state`. `noise_draw` is a unit-normal
    /// sample; it is ignored when `read_noise_sigma` is zero.
    pub fn conductance(&self, state: MtjState, noise_draw: Option<f64>) -> f64 {
        let g = match state {
            MtjState::AntiParallel => self.g_ap,
            MtjState::Parallel => self.g_p(),
        };
        match noise_draw {
            Some(z) if self.read_noise_sigma > 0.0 => {
                (g * (1.0 + self.read_noise_sigma * z)).max(MIN_NOISY_CONDUCTANCE)
            }
            _ => g,
        }
    }
}

/// Learning pulse polarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PulseKind {
    /// Drives the device toward the parallel state.
    Potentiation,
    /// Drives the device toward the anti-parallel state.
    Depression,
}

impl PulseKind {
    pub fn target(self) -> MtjState {
        match self {
            PulseKind::Potentiation => MtjState::Parallel,
            PulseKind::Depression => MtjState::AntiParallel,
        }
    }
}

/// Result of one learning pulse on one device.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PulseOutcome {
    /// The device was already in the pulse's target state.
    NoAttempt,
    Switched,
    AttemptedNoSwitch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwitchingMode {
    /// One fixed probability per pulse kind.
    FixedProbability,
    /// Logistic dependence on pulse amplitude, one curve per polarity.
    VoltageDependent,
}

/// Switching probability model. Pulse duration is folded into the
/// configured probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchingModel {
    pub mode: SwitchingMode,
    /// AP -> P probability per potentiation pulse.
    pub p_pot: f64,
    /// P -> AP probability per depression pulse.
    pub p_dep: f64,
    pub v50_pot: f64,
    pub v50_dep: f64,
    pub slope_pot: f64,
    pub slope_dep: f64,
    /// Learning pulse amplitudes used by [`apply_pulse`] in
    /// voltage-dependent mode.
    pub v_pot: Option<f64>,
    pub v_dep: Option<f64>,
}

impl Default for SwitchingModel {
    fn default() -> Self {
        SwitchingModel {
            mode: SwitchingMode::FixedProbability,
            p_pot: 0.35,
            p_dep: 0.30,
            v50_pot: 0.0,
            v50_dep: 0.0,
            slope_pot: 1.0,
            slope_dep: 1.0,
            v_pot: None,
            v_dep: None,
        }
    }
}

impl SwitchingModel {
    pub fn fixed(p_pot: f64, p_dep: f64) -> Self {
        SwitchingModel {
            p_pot,
            p_dep,
            ..SwitchingModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_pot", self.p_pot), ("p_dep", self.p_dep)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config("device", format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.mode == SwitchingMode::VoltageDependent {
            for (name, s) in [("slope_pot", self.slope_pot), ("slope_dep", self.slope_dep)] {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::config("device", format!("{name} must be > 0, got {s}")));
                }
            }
            if self.v_pot.is_none() || self.v_dep.is_none() {
                return Err(Error::config(
                    "device",
                    "voltage-dependent switching needs both v_pot and v_dep",
                ));
            }
        }
        Ok(())
    }

    /// Probability that a pulse of `kind` switches a device currently in
    /// `state`. Zero when the pulse points at the current state.
    pub fn switching_probability(
        &self,
        kind: PulseKind,
        state: MtjState,
        pulse_voltage: Option<f64>,
    ) -> Result<f64> {
        if kind.target() == state {
            return Ok(0.0);
        }
        match self.mode {
            SwitchingMode::FixedProbability => Ok(match kind {
                PulseKind::Potentiation => self.p_pot,
                PulseKind::Depression => self.p_dep,
            }),
            SwitchingMode::VoltageDependent => {
                let v = pulse_voltage.ok_or_else(|| {
                    Error::config("device", "voltage-dependent switching requires a pulse voltage")
                })?;
                let (v50, slope) = match kind {
                    PulseKind::Potentiation => (self.v50_pot, self.slope_pot),
                    PulseKind::Depression => (self.v50_dep, self.slope_dep),
                };
                Ok(logistic(v.abs(), v50, slope))
            }
        }
    }

    fn pulse_voltage(&self, kind: PulseKind) -> Option<f64> {
        match kind {
            PulseKind::Potentiation => self.v_pot,
            PulseKind::Depression => self.v_dep,
        }
    }
}

fn logistic(v: f64, v50: f64, slope: f64) -> f64 {
    1.0 / (1.0 + (-(v - v50) / slope).exp())
}

/// Apply one learning pulse. `uniform_draw` must lie in `[0, 1)`.
///
/// A voltage-dependent model without a configured pulse voltage never
/// switches; [`SwitchingModel::validate`] rejects such models up front.
pub fn apply_pulse(
    state: MtjState,
    kind: PulseKind,
    model: &SwitchingModel,
    uniform_draw: f64,
) -> (MtjState, PulseOutcome) {
    if kind.target() == state {
        return (state, PulseOutcome::NoAttempt);
    }
    let p = model
        .switching_probability(kind, state, model.pulse_voltage(kind))
        .unwrap_or(0.0);
    if uniform_draw < p {
        (kind.target(), PulseOutcome::Switched)
    } else {
        (state, PulseOutcome::AttemptedNoSwitch)
    }
}
