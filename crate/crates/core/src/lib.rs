//! Rotation-augmented time-series-feature network for human activity recognition.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rotation;
pub mod signal;
pub mod trainer;
pub mod tsf;

pub use error::{Error, Result};
