//! Black hole search by three scattered agents with pebbles on a dynamic ring.
//!
//! The crate simulates the round-synchronous model, runs the Gather&Locate
//! and CautiousPendulum protocols against edge-removal adversaries, and
//! checks the resulting traces.

pub mod adversary;
pub mod config;
pub mod diagram;
pub mod harness;
pub mod kernel;
pub mod model_check;
pub mod protocols;
pub mod ring;
pub mod verifier;
