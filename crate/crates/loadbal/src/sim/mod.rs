//! Seeded Monte-Carlo harness.
//!
//! The submodules split the harness into seed derivation ([`rng`]),
//! arrival-order sampling ([`schedule`]), per-trial tree analyses
//! ([`analyze`]), trial execution ([`runner`]), and aggregation plus
//! deterministic rendering ([`report`]).

pub mod analyze;
pub mod report;
pub mod rng;
pub mod runner;
pub mod schedule;
