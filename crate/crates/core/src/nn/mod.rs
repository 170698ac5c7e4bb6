//! Minimal neural-network engine: dense and embedding layers, an LSTM cell,
//! a feed-forward classifier, losses, Adam and a finite-difference checker.

pub mod ffnn;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod optim;
pub mod tensor;

pub use ffnn::FfnnParams;
pub use layers::{Dense, Embedding};
pub use loss::{loss_and_grad, LossKind, Target};
pub use lstm::{LstmCache, LstmParams, LstmState};
pub use optim::OptimizerState;
pub use tensor::{Param, Parameterized, Tensor2};
