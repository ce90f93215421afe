//! Measurement-feedback ground-state preparation for frustration-free
//! Hamiltonians H = Σ P_i, simulated exactly on closed configuration sectors.
//!
//! The numerical core is generic over [`num::Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the analysis layers use.

pub mod basis;
pub mod error;
pub mod fits;
pub mod markov;
pub mod models;
pub mod num;
pub mod pauli;
pub mod protocol;
pub mod resetfree;
pub mod spectra;
pub mod statevec;

pub use basis::{Configuration, SectorBasis};
pub use error::{Error, Result};
pub use num::Real;

pub type StateVector = statevec::StateVector<f64>;
pub type LayeredModel = models::LayeredModel<f64>;
pub type ProjectorTerm = models::ProjectorTerm<f64>;
