//! Exact diagonalization of qubit and qutrit spin chains with chaos, ETH and
//! thermalization diagnostics.

pub mod cli;
pub mod dynamics;
pub mod ensembles;
pub mod entanglement;
pub mod error;
pub mod eth;
pub mod lattice;
pub mod sectors;
pub mod spectral;

pub use error::{Error, Result};
