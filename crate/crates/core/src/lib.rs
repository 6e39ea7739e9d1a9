//! Reliability benchmark for synthetic time-series evaluation measures.
//!
//! Real data is perturbed along a modulation path, each measure scores the
//! perturbed data against the real data, and the resulting trajectories are
//! compared with the expected behavior of the perturbation.

pub mod error;
pub mod data;
pub mod embed;
pub mod evaluation;
pub mod kernels;
pub mod measures;
pub mod model;
pub mod rng;
pub mod transforms;

pub use error::{Error, Result};
