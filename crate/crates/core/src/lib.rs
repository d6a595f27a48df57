//! Numerical Korn constants of thin shells over parabolic and elliptic
//! mid-surfaces.

pub mod ansatz;
pub mod discretization;
pub mod eigensolver;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod quadrature;

pub use error::{KornError, Result};
