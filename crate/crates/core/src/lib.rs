//! Hybrid classical/quantum binary classification.
//!
//! The crate is organised bottom-up:
//!
//! * [`qsim`] is a dense statevector simulator (little-endian qubit order).
//! * [`ansatz`] builds the data re-uploading variational circuit and differentiates it.
//! * [`nn`] holds the dense layers, dropout, loss and SGD used by the classical parts.
//! * [`model`] assembles the hybrid classifier and its classical counterpart.
//! * [`metrics`] computes ROC curves and AUC.
//! * [`data`] loads, generates, splits and standardizes datasets.
//! * [`training`] runs mini-batch SGD and repeated-seed evaluation.
//! * [`experiments`] drives sweeps, timing benchmarks and file output.

pub mod ansatz;
pub mod data;
mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod qsim;
pub mod training;

pub use error::{Error, Result};
