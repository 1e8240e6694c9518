//! Hypersparse traffic matrices from packet captures: windowing,
//! prefix-preserving anonymization, network quantities, multi-temporal
//! hierarchies, range focusing, heavy-tail calibration, detection models
//! and compressed archives.

pub mod anon;
pub mod archive;
pub mod calibration;
pub mod cidr;
pub mod detection;
mod error;
pub mod hierarchy;
pub mod hmatrix;
pub mod ingest;
pub mod pipeline;
pub mod quantities;
pub mod ranges;

pub use error::{Error, Result};
pub use hmatrix::HypersparseMatrix;
