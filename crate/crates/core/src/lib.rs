//! Semiclassical dynamics of coupled NLS solitons in slowly varying potentials.

pub mod error;
pub mod evolution;
pub mod experiment;
pub mod grid;
pub mod ground_state;
pub mod hamiltonian;
pub mod observables;
pub mod order;
pub mod potential;

pub use error::{Error, Result};
pub use grid::{ComplexField, Grid, RealField};
pub use potential::{Potential, PotentialSpec};
