//! Command-line harness over the `loadbal` library: instance generators,
//! seeded trial runs, parameter sweeps, and the acceptance suite.
//!
//! The binary is `loadbal`; this library exists so integration tests can
//! drive the same command implementations in process.

pub mod cli;
pub mod verify;
