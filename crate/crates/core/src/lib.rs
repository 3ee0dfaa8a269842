//! Dynamical-decoupling sequences for a qubit coupled to a small spin bath:
//! sequence construction, exact propagation and average-Hamiltonian analysis.

pub mod aht;
pub mod error;
pub mod model;
pub mod opcore;
pub mod seq;
pub mod sim;
pub mod tol;

pub use error::{Error, Result};
