pub mod bvfun;
pub mod cli;
pub mod error;
pub mod fourier;
pub mod mrs;
pub mod orthopoly;
pub mod quad;
pub mod tridiag;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
