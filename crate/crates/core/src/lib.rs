//! Numerical laboratory for Berry phase estimation.
//!
//! The crate is organised bottom-up: [`hamcore`] represents loops of local
//! Hamiltonians, [`exact`] diagonalizes them and computes reference Berry
//! phases, [`dynamics`] simulates adiabatic evolution, [`qpe`] performs
//! phase estimation on the resulting propagators, and [`bpe`] combines two
//! runtimes to cancel the dynamical phase. [`hardness`] compiles circuits
//! into history-state Hamiltonian loops and [`verifier`] simulates the
//! energy-threshold verification protocol.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod bpe;
pub mod budget;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod families;
pub mod hamcore;
pub mod hardness;
pub mod qpe;
pub mod verifier;

pub use budget::DenseBudget;
pub use error::{Error, Result};
pub use hamcore::{HamiltonianFamily, NormBounds, Pauli, PauliString, TrigCoefficient, C64};
