//! Exact single-photon simulation of counterfactual logic gates.
//!
//! Gates are built as explicit networks of beam-splitters, phase shifters,
//! attenuators and switchable detectors ([`netlist`]), evaluated on an
//! unnormalized photon amplitude state ([`state`]). On top of that sit the
//! NAND / NOR / XOR gate builders with their closed-form approximations
//! ([`gates`]), a channel-noise Monte Carlo harness ([`noise`]), GHZ and W
//! entanglement pipelines driven by three-level-atom controllers
//! ([`entangle`]) and a small text format for pipelines ([`dsl`]).

pub mod components;
pub mod dsl;
pub mod entangle;
pub mod error;
pub mod gates;
pub mod netlist;
pub mod noise;
pub mod state;

pub use error::{Error, Result};
pub use state::{ModeId, PhotonState, SinkId};
