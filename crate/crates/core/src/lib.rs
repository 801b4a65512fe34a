//! Simulation of flux-driven transmon emitter/detector circuits.

pub mod circuit;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod protocols;
pub mod slh;
pub mod ted;
pub mod timeop;
pub mod units;

pub use error::{Error, Result};
pub use fock::{expectation, lowering, number, ModeSpec, Op, ProductSpace, State, C64};
