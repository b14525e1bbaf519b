//! Minimal deterministic neural-network engine.
//!
//! Values live in [`Tensor`]s; trainable state lives in [`Parameter`]s held by
//! a [`ParamStore`]. A [`Graph`] records a forward pass over the ops the model
//! zoo needs and [`Graph::backward`] returns reverse-mode gradients. The engine
//! is generic over [`Scalar`] so training runs in `f32` while gradient checks
//! run in `f64`.

mod adam;
mod config;
mod gradcheck;
mod graph;
mod kernels;
mod loss;
mod param;
mod scalar;
mod tensor;

pub use adam::Adam;
pub use config::TrainConfig;
pub use gradcheck::{check_graph_gradients, CheckReport, gradient_check_fn, randomize_parameters, relative_error};
pub use graph::{Gradients, Graph, NodeId};
pub use kernels::{
    conv1d_forward, dense_forward, lstm_forward, max_pool_over_time, LstmWeights,
};
pub use loss::{loss, LossKind};
pub use param::{ParamId, ParamStore, Parameter};
pub use scalar::Scalar;
pub use tensor::Tensor;
