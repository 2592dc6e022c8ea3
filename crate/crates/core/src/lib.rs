//! Personal sound zone toolkit: physically layered acoustic transfer
//! functions, pressure-matching filter design, and IZI / IPI / XTC
//! evaluation under a cumulative ablation.

pub mod ablation;
pub mod archive;
pub mod atf;
pub mod cli;
pub mod config;
pub mod dsp;
pub mod error;
pub mod filters;
pub mod geometry;
pub mod metrics;
pub mod room;
pub mod specfun;

pub use error::{Error, Result};
