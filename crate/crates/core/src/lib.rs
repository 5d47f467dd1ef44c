//! Semiclassical reduction of magnetic Laplacians near a non-degenerate magnetic well.

pub mod error;
pub mod jet;

pub use error::{Error, Result};
pub mod classical;
pub mod field;
pub mod birkhoff;
pub mod predict;
