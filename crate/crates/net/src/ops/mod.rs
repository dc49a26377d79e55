//! Differentiable operations, each with a hand-written backward pass.

pub mod attention;
mod basic;
pub(crate) mod conv;
mod deform;
mod norm;

pub use attention::attention_maps;
