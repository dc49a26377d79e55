//! Synthetic dual-exposure data from sharp video.
//!
//! The pipeline upsamples a sharp clip in time, averages a window of frames
//! into a long exposure, darkens and corrupts the frame at the short-exposure
//! instant, and runs a log-intensity threshold-crossing simulator to produce
//! the events in between.

mod degrade;
mod pipeline;
mod recipe;
mod scene;
mod simulator;

pub use degrade::{darken, sample_noisy, synth_short, DegradationParams, DegradationRanges, UniformRange};
pub use pipeline::{interpolate, make_sample, sample_times, synth_long};
pub use recipe::SynthesisRecipe;
pub use scene::{procedural_clip, SceneConfig};
pub use simulator::{simulate_events, SimulatorConfig};
