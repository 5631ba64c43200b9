//! Datasets, file formats, experiment sweeps and configuration for the
//! spectral-quotient cumulant classifier. Signal processing and the
//! classifier itself live in `sqcc-core`.

pub mod config;
pub mod dataset;
pub mod error;
pub mod frame_store;
pub mod harness;
pub mod model_file;
pub mod results;

pub use error::{Error, Result};
