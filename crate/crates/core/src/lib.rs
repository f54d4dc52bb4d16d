//! Spiking neural network simulator with binary magnetic tunnel junction
//! synapses that learn through stochastic spin-transfer-torque switching.

pub mod commands;
pub mod config;
pub mod crossbar;
pub mod data;
pub mod device;
pub mod error;
pub mod learning;
pub mod network;
pub mod neuron;
pub mod rng;
pub mod snapshot;

pub use config::{Command, RunConfig};
pub use crossbar::{InputVector, SubtractionConfig, SynapseArray};
pub use device::{DeviceParams, MtjState, PulseKind, PulseOutcome, SwitchingModel};
pub use error::{Error, Result};
pub use network::{Network, NetworkParams};
pub use neuron::NeuronParams;
