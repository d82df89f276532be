//! sparsn: a sparse-grid discrete-ordinates discontinuous Galerkin solver
//! for the steady monoenergetic radiative transfer equation.

pub mod assembly;
pub mod domains;
pub mod error;
pub mod gauss;
pub mod ordinates;
pub mod postprocess;
pub mod problems;
pub mod scattering;
pub mod solver;
pub mod sparse_space;
pub mod wavelet1d;

pub use error::{Error, Result};
