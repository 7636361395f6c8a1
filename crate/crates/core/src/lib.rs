//! Heisenberg-limited Hamiltonian learning under a minimum evolution time,
//! simulated exactly on a few qubits.
//!
//! The crate is organised bottom-up:
//!
//! - [`pauli`], [`sparse`], [`span`], [`truncation`]: Pauli labels and sparse Pauli polynomials.
//! - [`dense`]: exponentials, logarithms, distances and norms of small dense matrices.
//! - [`oracle`]: the time-evolution black box and its query ledger.
//! - [`tomography`]: Bell-basis amplitude encoding and sparse pure-state tomography.
//! - [`control`]: long-time emulation of short Trotter steps and BCH truncations.
//! - [`learner`]: the coefficient-extraction, standard-quantum-limit and main learners.
//! - [`verifier`]: numerical checks of the supporting inequalities.
//! - [`runner`]: the command-line front end.

// `!(x > 0.0)` guards deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dense;
pub mod error;
pub mod learner;
pub mod oracle;
pub mod par;
pub mod pauli;
pub mod rng;
pub mod runner;
pub mod span;
pub mod sparse;
pub mod tomography;
pub mod truncation;
pub mod verifier;

pub use error::{Error, Result};
