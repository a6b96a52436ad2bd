//! Macroscopic-state structure of finite-dimensional quantum systems.

mod error;
pub mod correlations;
pub mod entropy;
pub mod evolve;
pub mod json;
pub mod mppp;
pub mod numerics;
pub mod par;
pub mod quantum;
pub mod random;
pub mod resources;
pub mod retrodiction;

pub use error::{Error, ErrorKind, Result};
