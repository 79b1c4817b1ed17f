//! Sparse ellipsoid-RBF representation of molecular Gaussian density maps.

pub mod cli;
pub mod density;
pub mod erbf;
pub mod error;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod pqr;
pub mod trainer;

pub use error::{Error, Result};
