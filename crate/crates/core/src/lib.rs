//! Discrete sub/super-solution laboratory for Neumann p-Laplacian systems
//! with singular sign-changing boundary weights.

pub mod auxiliary;
pub mod barriers;
pub mod domain;
pub mod error;
pub mod model;
pub mod plap;
pub(crate) mod quadrature;
pub mod report;
pub mod system;

pub use error::{Error, Result};
