//! Core library for simulating virtual distillation under diluted i.i.d. noise.
//!
//! Virtual distillation replaces a noisy state ρ' by ρ'^M / tr[ρ'^M], which
//! suppresses every sub-dominant eigenvector of ρ' exponentially in the
//! distillation order M. Noise dilution splits a single peripheral noise
//! channel of rate ε into `L_err` layers of rate ε/L_err interleaved with
//! subcircuits W_1 … W_{L_err}. This crate provides:
//!
//! * dense complex linear algebra sized for desk-scale experiments
//!   ([`linalg`]),
//! * reproducible random-stream plumbing and circuit-unitary generators
//!   ([`rng`], [`unitary`]),
//! * exact i.i.d. loss and Pauli channels ([`channel`]),
//! * the dilution pipeline producing target and noisy states ([`pipeline`]),
//! * distillation, MSE, and error-component extraction ([`distill`]),
//! * closed-form predictions and Monte Carlo estimators for the circuit
//!   averages those predictions depend on ([`theory`]).
//!
//! The crate is `no_std` (with `alloc`) so the numerical kernel stays free of
//! platform dependencies; all file and thread handling lives in the companion
//! CLI crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod channel;
pub mod distill;
pub mod error;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod theory;
pub mod unitary;

pub use error::{CoreError, Result};
pub use linalg::{CMat, DensityOp, HilbertSpace, UnitaryOp, C64};
