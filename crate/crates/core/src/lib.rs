//! Rail-constrained multi-domain DVFS and power-gating scheduler for
//! layer-wise neural network inference on RRAM-style accelerators.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod model;
pub mod railopt;
pub mod solver;
pub mod statespace;
pub mod workload;

pub use error::{Error, Result};
