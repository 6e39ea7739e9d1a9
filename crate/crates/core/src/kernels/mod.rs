//! Shared numeric and statistical primitives.

pub mod cluster;
pub mod dtw;
pub mod frechet;
pub mod linear;
pub mod neighbors;
pub mod spectral;
pub mod stats;
