//! Shared building blocks for event-assisted dual-exposure imaging.
//!
//! This crate holds everything that does not need a neural network:
//! radiometric frames and event streams, the synthetic data pipeline that
//! manufactures short/long exposure pairs plus events from sharp video, the
//! voxel-grid event encoding, on-disk formats, and the image-quality and
//! dataset-statistics tooling used by evaluation.

pub mod error;
pub mod event;
pub mod flow;
pub mod frame;
pub mod io;
pub mod kv;
pub mod metrics;
pub mod par;
pub mod representation;
pub mod rng;
pub mod sample;
pub mod stats;
pub mod synthesis;
pub mod timing;

pub use error::{Error, Result};
pub use event::{Event, EventStream};
pub use frame::{Frame, FrameSequence};
pub use representation::{perturb_window, voxelize, VoxelGrid};
pub use sample::{validate_sample, ExposureSample};
pub use timing::ExposureTiming;

/// Floor added inside every logarithm of intensity.
pub const LOG_EPS: f64 = 1e-4;
