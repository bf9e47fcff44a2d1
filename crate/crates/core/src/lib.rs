//! Quantum transport on tight-binding networks and its emulation by
//! inductively coupled RLC oscillator networks.
//!
//! The crate is organised around the two descriptions of the same dynamics
//! and the map between them:
//!
//! - [`tight_binding`]: single-excitation Hamiltonians with losses and three
//!   interchangeable propagators.
//! - [`circuit`]: RLC node networks integrated in node-voltage /
//!   branch-current form.
//! - [`mapping`]: circuit ↔ Hamiltonian conversion, frequency rescaling and
//!   control-voltage synthesis for the reconfigurable platform.
//! - [`experiments`]: the bundled presets (Anderson, SSH, coherent transfer,
//!   B800 ring) and the disorder ensemble runner.
//! - [`analysis`]: envelope extraction, transport metrics and agreement
//!   reports.
//!
//! Interchangeable methods (propagators, envelope extractors, presets) are
//! trait objects looked up by name through a [`registry::Registry`].

pub mod analysis;
pub mod circuit;
pub mod error;
pub mod experiments;
pub mod mapping;
pub mod ode;
pub mod registry;
pub mod tight_binding;

pub use error::{Error, Result};
