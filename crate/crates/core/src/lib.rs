//! Progressive multi-class, multi-instance geometric model fitting.

pub mod datasets;
pub mod error;
pub mod geometry;
pub mod labeling;
pub mod neighborhood;
pub mod progx;
pub mod proposal;
pub mod report;
pub mod scoring;
pub mod validation;

pub use error::{Error, Result};
