//! Hard-constrained sequential physics-informed neural networks.

pub mod diffengine;
pub mod error;
pub mod network;

pub use error::{Error, Result};
pub mod ansatz;
pub mod problems;
pub mod training;
