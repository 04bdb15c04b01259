//! Learning controlled Hamiltonian dynamics from trajectories.
//!
//! The crate is layered bottom-up: [`diffkit`] differentiates, [`netcore`]
//! holds the networks and structured heads, [`hamdyn`] assembles vector
//! fields, [`odeflow`] integrates and trains, [`envsim`] provides the ground
//! truth systems and datasets, and [`energyctl`] turns learned energies into
//! controllers.

pub mod diffkit;
pub mod energyctl;
pub mod envsim;
pub mod error;
pub mod hamdyn;
pub mod netcore;
pub mod odeflow;

pub use diffkit::{Dual, Tape, Tensor, Var};
pub use error::{Error, Result};
