//! Time-domain computation of Casimir forces at zero and nonzero temperature.
//!
//! The pipeline: build a [`model::Geometry`], rasterize it, assemble a
//! [`stress::StressTrace`] from impulsive FDTD runs, then weight the trace with
//! a contour weight ([`weights`]) to get a [`force::ForceResult`]. The
//! [`reference`] module holds independent imaginary-frequency oracles.

pub mod cli;
pub mod error;
pub mod fdtd;
pub mod force;
pub mod model;
pub mod reference;
pub mod stress;
pub mod weights;

pub use error::{Error, Result};
