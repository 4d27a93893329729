//! Three-dimensional human-body blockage (HBB) model for outdoor
//! millimeter-wave links.
//!
//! The crate is split along the model's layers:
//!
//! - [`geometry`]: self-blockage sectors, the pedestrian blocking region and
//!   the angle of arrival along a straight sidewalk trajectory.
//! - [`stochastics`]: Poisson blockage arrivals and the frame-level
//!   blockage-free probability with duration memory.
//! - [`scenario`]: the single-user sidewalk study (frame series, expected
//!   downlink time, dB losses, parameter sweeps).
//! - [`montecarlo`]: a seeded discrete-event oracle for the arrival and
//!   duration process.
//! - [`config`] and [`cli`]: configuration ingestion and the batch front-end.

pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod scenario;
pub mod stochastics;

mod numeric;

pub use error::{HbbError, Result};
