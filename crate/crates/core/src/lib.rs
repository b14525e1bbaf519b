//! Toolkit for binary and multiclass sexism identification in short social
//! media texts.
//!
//! The crate is organised along the pipeline:
//!
//! - [`corpus`]: EXIST-style TSV datasets, label spaces, the ordered 80/20 split.
//! - [`preprocess`]: text normalization and tokenization.
//! - [`augment`]: Easy Data Augmentation (synonym replacement, random
//!   insertion, random swap).
//! - [`embed`]: vocabularies, integer encoding, pretrained tables and the
//!   CEMB contextual-embedding store.
//! - [`tensornet`]: a small reverse-mode neural engine with Adam and gradient
//!   checking.
//! - [`models`]: the model zoo (NBoW, LSTM, BiLSTM, CNN, MultiCNN heads), the
//!   training loop with early stopping, prediction and checkpoints.
//! - [`eval`]: confusion matrices, macro metrics, run averaging, baselines.
//! - [`analysis`]: error-analysis reports.

pub mod analysis;
pub mod augment;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod models;
pub mod preprocess;
pub mod tensornet;

pub use corpus::{Dataset, Example, LabelSpace, Source, Task, Task1Label, Task2Label};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, Metrics};
pub use models::{Model, ModelSpec};
pub use tensornet::TrainConfig;
pub use tensornet::{Scalar, Tensor};
