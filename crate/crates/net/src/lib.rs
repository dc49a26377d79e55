//! Dual-path event-guided restoration network, its autograd engine,
//! training loop, checkpoints and evaluation harnesses.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod loss;
pub mod model;
pub mod ops;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod train;

pub use error::{NetError, Result};
pub use graph::{Graph, Var};
pub use loss::Lambdas;
pub use model::{apply_ablation, count_parameters, Ablation, EdeiNet, ModelConfig, ModelInput};
pub use tensor::{Scalar, Tensor};
pub use train::{train_stage, Stage, TrainConfig};
