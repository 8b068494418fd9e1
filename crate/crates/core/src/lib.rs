//! Learning optimal transport maps between 2D distributions with
//! displacement-interpolation max-min training, and scoring them against an
//! exact discrete optimal-transport oracle.

pub mod datasets;
pub mod diotm;
pub mod error;
pub mod nn;
pub mod ot;

pub use error::{Error, Result};
