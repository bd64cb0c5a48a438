//! Reconstruction of an unknown spin-½ state from one joint measurement on the
//! spin and an assistant system prepared in a known state.
//!
//! Two assistants are supported: a second spin ([`spin`]) and a coherent
//! field mode coupled through the Jaynes–Cummings interaction ([`coherent`]).
//! [`oracle`] evolves the full joint state numerically and serves as the
//! reference for both, [`measurement`] simulates finite-shot data and [`cli`]
//! drives the `assist-tomo` binary.

pub mod cli;
pub mod coherent;
pub mod error;
pub mod measurement;
pub mod oracle;
pub mod quantum;
pub mod spin;

pub use coherent::{ExpectationTriple, JcParams, ReconstructionSystem};
pub use error::{Error, Result};
pub use quantum::{BlochVector, DensityMatrix, FockSpace, Operator};
pub use spin::SpinScheme;
