//! Experiment harness for virtual distillation under diluted i.i.d. loss
//! and Pauli noise.
//!
//! The companion core crate owns the physics — channels, pipelines,
//! distillation, closed forms. This crate owns everything around it:
//! experiment configuration, deterministic parallel sampling, statistics,
//! CSV/sidecar emission, the published-table reproductions, and the
//! self-verification suite the `vdist` binary fronts.

pub mod config;
pub mod experiments;
pub mod output;
pub mod runner;
pub mod special;
pub mod stats;
pub mod tables;
pub mod verify;
