//! Shared fixtures for the benchmarks.

use nalgebra::DVector;
use tedsim::fock::{ONE, ZERO};
use tedsim::C64;

/// Data qubit in its excited state.
pub fn excited() -> DVector<C64> {
    DVector::from_vec(vec![ZERO, ONE])
}
