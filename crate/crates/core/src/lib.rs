//! Zeroth-order conservation laws of the two-dimensional shallow water
//! equations with variable bottom topography: detection, classification,
//! verification and Hamiltonian structure.

pub mod charspace;
pub mod config;
pub mod dual;
pub mod equivmaps;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod furcate;
pub mod hamiltonian;
pub mod linalg;
pub mod report;
pub mod spline;
pub mod swesolver;
pub mod timefun;
pub mod topography;

pub use error::{Error, Result};
