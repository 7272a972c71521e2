//! Statistical verification of aggregated power demand.
//!
//! Given a population of users, each deviating independently from a
//! predicted power profile, and a substation profile assigning a state to
//! every time slot, [`verifier::verify`] approximates for every state `v`
//! and power slot `w` the probability that aggregated demand falls in `w`
//! at a time slot drawn uniformly from those in state `v`. Each cell is
//! either a relative (ε, δ) approximation or ⊥ (probability below ε with
//! confidence 1 − δ).

pub mod cli;
pub mod ed;
pub mod engine;
pub mod generate;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod verifier;

pub use ed::{estimate_mean, make_params, required_cutoff, EdOutcome, EdParams};
pub use scenario::Scenario;
pub use verifier::{verify, VerificationReport, VerifyOptions};
