//! Numerical laboratory for the fractional Calderon problem.

pub mod cli;
pub mod entropy;
pub mod error;
pub mod extension;
pub mod forward;
pub mod fractional;
pub mod instability;
pub mod lattice;
pub mod linalg;
pub mod liouville;
pub mod provenance;
pub mod quadrature;

pub use error::{Error, Result};
