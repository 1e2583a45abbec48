//! Spectral numerical geometry on the 2-sphere: conformal uniformization, the
//! Ξ-tensor and its lightcone interpretation, and eigenfunction embeddings.

pub mod error;
pub mod experiment;
pub mod lightcone;
pub mod metric;
pub mod ratio;
pub mod sht;
pub mod stability;
pub mod uniformize;

pub use error::{Error, Result};
