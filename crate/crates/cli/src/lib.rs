//! Batch front-end for `pxlap-core`.

pub mod config;
pub mod error;
pub mod fieldio;
pub mod pipeline;
pub mod report;
