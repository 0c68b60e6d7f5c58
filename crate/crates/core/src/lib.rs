//! Seed-reproducible simulation and analysis of photon coincidence counting
//! behind a Mach-Zehnder interferometer fed by an attenuated laser.
//!
//! The pipeline runs source → interferometer → detectors → coincidence
//! counting module, one PZT scan point at a time. [`scan::run_scan`] drives
//! it; [`analysis`] turns the counts into visibilities, g2 estimates and
//! fringe periods.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coincidence;
pub mod config;
pub mod detection;
pub mod error;
pub mod export;
pub mod fig4;
pub mod interferometer;
pub mod scan;
pub mod seed;
pub mod source;
pub mod trace;

pub use error::{Error, ErrorKind, Result};
