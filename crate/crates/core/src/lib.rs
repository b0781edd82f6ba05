//! Bohmian dynamics of two entangled coherent-state qubits.
//!
//! The crate evaluates the exact two-term wavefunction, integrates Bohmian
//! trajectories through its moving nodal lattice, samples initial ensembles,
//! accumulates trajectory points into pattern grids and classifies
//! trajectories as ordered or chaotic.

pub mod chaos;
pub mod ensemble;
pub mod error;
pub mod integrate;
pub mod nodes;
pub mod params;
pub mod pattern;
pub mod render;
pub mod sampler;
pub mod wave;

pub use error::*;
pub use params::{Parity, WaveParams};
pub use wave::{PhasePoint, VelocityVector};
