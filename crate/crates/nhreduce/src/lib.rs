//! Hamiltonization and reduction of nonholonomic systems with symmetry.

pub mod chaplygin;
pub mod error;
pub mod examples;
pub mod gauge;
pub mod geometry;
pub mod integrate;
pub mod mwreduce;
pub mod so3;
pub mod symmetry;
pub mod system;

pub use error::{NhError, Result};
