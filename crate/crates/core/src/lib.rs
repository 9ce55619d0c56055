//! Memory and non-Markovianity of a qubit coupled to a structured bosonic
//! bath.
//!
//! The crate covers the exactly solvable rotating-wave model (Volterra
//! equation for the excited-state amplitude), the full spin-boson model
//! (chain mapping plus matrix product state evolution), the qubit channel
//! algebra behind the optimal recovery fidelity, and the trace-distance
//! measures of information backflow.

pub mod bath;
pub mod chain;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod measures;
pub mod mps;
pub mod qubit;
pub mod runner;
pub mod rwa;
pub mod tolerances;

pub use error::{Error, Result};
pub use grid::TimeGrid;
