//! Binarized stochastic STDP.
//!
//! When an output neuron fires, every synapse in its row receives a
//! potentiation pulse if its input was active within the last
//! `window_cycles` clock cycles, and a depression pulse otherwise. Each pulse
//! switches the device with the configured probability.

use rand::Rng;

use crate::crossbar::{InputVector, SynapseArray};
use crate::device::{apply_pulse, MtjState, PulseKind, PulseOutcome, SwitchingModel};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StdpConfig {
    pub window_cycles: u64,
    pub model: SwitchingModel,
}

impl Default for StdpConfig {
    fn default() -> Self {
        StdpConfig {
            window_cycles: 1,
            model: SwitchingModel::default(),
        }
    }
}

impl StdpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_cycles == 0 {
            return Err(Error::config("learning", "window_cycles must be >= 1"));
        }
        self.model.validate()
    }
}

/// Most recent clock cycle at which each input column was active.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivityTrace {
    last_active: Vec<Option<u64>>,
}

impl ActivityTrace {
    pub fn new(n_in: usize) -> Self {
        ActivityTrace {
            last_active: vec![None; n_in],
        }
    }

    pub fn len(&self) -> usize {
        self.last_active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_active.is_empty()
    }

    pub fn last_active(&self, col: usize) -> Option<u64> {
        self.last_active[col]
    }

    /// Record the input applied during `cycle`.
    pub fn record(&mut self, input: &InputVector, cycle: u64) -> Result<()> {
        if input.len() != self.last_active.len() {
            return Err(Error::argument(format!(
                "input length {} != trace length {}",
                input.len(),
                self.last_active.len()
            )));
        }
        for (slot, &bit) in self.last_active.iter_mut().zip(input.bits()) {
            if bit {
                *slot = Some(cycle);
            }
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.last_active.fill(None);
    }
}

/// Pulse kind per column for a fire at `current_cycle`.
pub fn select_pulses(trace: &ActivityTrace, current_cycle: u64, cfg: &StdpConfig) -> Vec<PulseKind> {
    let oldest = current_cycle.saturating_sub(cfg.window_cycles - 1);
    trace
        .last_active
        .iter()
        .map(|last| match last {
            Some(c) if *c >= oldest => PulseKind::Potentiation,
            _ => PulseKind::Depression,
        })
        .collect()
}

/// One attempted switch (the device was not already in the target state).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SwitchEvent {
    pub col: usize,
    pub replica: usize,
    pub kind: PulseKind,
    pub outcome: PulseOutcome,
}

/// Result of pulsing one row. Synapses absent from `events` were already
/// in their target state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StdpOutcome {
    pub events: Vec<SwitchEvent>,
    pub no_attempt: usize,
}

impl StdpOutcome {
    pub fn switched(&self) -> usize {
        self.events.iter().filter(|e| e.outcome == PulseOutcome::Switched).count()
    }

    pub fn attempted(&self) -> usize {
        self.events.len()
    }
}

/// Pulse every synapse of `row`. All replicas of a column get the same
/// pulse; one uniform draw is consumed per synapse, column-major with the
/// replica innermost, whether or not a switch is attempted.
pub fn apply_stdp<R: Rng + ?Sized>(
    array: &mut SynapseArray,
    row: usize,
    pulses: &[PulseKind],
    cfg: &StdpConfig,
    rng: &mut R,
) -> Result<StdpOutcome> {
    if row >= array.n_out() {
        return Err(Error::argument(format!("row {row} out of range (n_out = {})", array.n_out())));
    }
    if pulses.len() != array.n_in() {
        return Err(Error::argument(format!(
            "pulse count {} != n_in {}",
            pulses.len(),
            array.n_in()
        )));
    }
    let r = array.replicas();
    let words = array.row_words_mut(row);
    let mut outcome = StdpOutcome::default();
    for (col, &kind) in pulses.iter().enumerate() {
        for replica in 0..r {
            let draw = rng::uniform(rng);
            let bit = col * r + replica;
            let (w, b) = (bit / 64, bit % 64);
            let state = MtjState::from_bit(words[w] >> b & 1 == 1);
            let (next, result) = apply_pulse(state, kind, &cfg.model, draw);
            match result {
                PulseOutcome::NoAttempt => outcome.no_attempt += 1,
                _ => outcome.events.push(SwitchEvent {
                    col,
                    replica,
                    kind,
                    outcome: result,
                }),
            }
            if next != state {
                words[w] ^= 1 << b;
            }
        }
    }
    Ok(outcome)
}
