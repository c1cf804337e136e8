//! Online load balancing on unrelated machines under random arrival orders.
//!
//! The crate stacks three layers:
//!
//! * **Algorithms.** A smoothed-maximum potential ([`potential`]) guides an
//!   online scheduler that places each arriving job where the potential of
//!   the virtual loads grows least, resetting those virtual loads halfway
//!   through, with a doubling wrapper that learns the makespan scale on the
//!   fly. The graph-balancing view ([`graphbal`]) specializes to trees,
//!   where each edge is a unit job on its two endpoint machines and a
//!   greedy orienter with fair-coin ties competes against an optimum of 1.
//! * **Inputs.** [`generators`] builds the tree families used to probe the
//!   algorithms: full and fat trees, recursively labeled trees, the static
//!   pairing-tournament tree, and a live adaptive adversary, plus planted
//!   job instances with a known optimum.
//! * **Harness.** [`sim`] runs seeded Monte-Carlo experiments whose output
//!   is byte-identical at any thread count, with per-trial analyzers for
//!   the structures that drive the lower bounds. [`oracle`] supplies the
//!   independent cross-checks: brute-force optima, makespan lower bounds,
//!   Chernoff tails, and a per-trial ledger for the first-phase guarantee.
//!
//! Shared vocabulary lives in [`model`]; every fallible path returns this
//! crate's [`Error`].

pub mod error;
pub mod generators;
pub mod graphbal;
pub mod model;
pub mod oracle;
pub mod potential;
pub mod sim;

pub use error::{Error, Result};
