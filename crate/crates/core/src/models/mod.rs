//! Model zoo: embedding source → head → dropout → dense + ReLU → dropout →
//! output layer, plus training with early stopping, prediction and
//! checkpoints.

mod checkpoint;
mod model;
mod spec;
mod train;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{
    build_model, prediction_from_logits, Batch, EmbeddingInit, EncodedSet, Inputs, Model,
    Prediction,
};
pub use spec::{EmbeddingSource, Head, ModelSpec};
pub use train::{
    compute_class_weights, gradient_check, train, train_with_monitor, ClassWeights, EarlyStopping,
    EpochRecord, TrainHistory,
};
