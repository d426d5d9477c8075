//! Subband adaptive filtering laboratory.

pub mod error;
pub mod filterbank;

pub use error::{Error, Result};
