//! Direct and inverse scattering for Jacobi operators whose coefficients are
//! short-range perturbations of a quasi-periodic finite-gap background.

pub mod background;
pub mod scattering;
pub mod error;
pub mod glm;
pub mod jost;
pub mod numerics;
pub mod scenario;
pub mod surface;

pub use error::{Error, Result};
pub use num_complex::Complex64;
