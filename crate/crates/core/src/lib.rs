//! Simulation and analysis toolkit for memory-enhanced fusion of W states.
//!
//! The crate is organised bottom-up:
//!
//! - [`fock`]: exact sparse state algebra over multimode occupation kets
//!   truncated to two total excitations, W-state constructors, projectors,
//!   populations and fidelity.
//! - [`fusion`]: single-photon interference fusion of two W states, branch
//!   decomposition, detection modelling and Monte-Carlo sampling.
//! - [`witness`]: the `αP₀ + βP₁ + γP₂ − |W_N⟩⟨W_N|` witness family, its
//!   validity certification and parameter optimisation.
//! - [`protocol`]: memory-enhanced and memory-less rate models, Monte-Carlo
//!   and closed form.
//! - [`cli`]: the `wfuse` command-line front end.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory.

pub mod cli;
pub mod error;
pub mod fock;
pub mod fusion;
pub mod protocol;
pub mod stats;
pub mod witness;

pub use error::{Error, Result};

/// Version tag written into every JSON schema emitted by the crate.
pub const SCHEMA_VERSION: u32 = 1;
