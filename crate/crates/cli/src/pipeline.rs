//! Shared model construction, training and scoring.

use std::path::Path;

use anyhow::{bail, Context, Result};
use exist_core::corpus::{load_dataset, split_train_val, Dataset, Task};
use exist_core::embed::{build_vocab, load_contextual, load_pretrained_table, ContextualStore};
use exist_core::eval::{metrics, ConfusionMatrix};
use exist_core::models::{
    build_model, train, EmbeddingInit, EmbeddingSource, EncodedSet, Model, ModelSpec, Prediction,
    TrainHistory,
};
use exist_core::preprocess::{normalize, tokenize, PreprocessConfig};
use exist_core::{Metrics, TrainConfig};

use crate::args::{Embeddings, ModelArgs};

/// Loads a TSV and normalizes its texts with the default rules.
pub fn load_normalized(path: &Path) -> Result<Dataset> {
    let d = load_dataset(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(normalized(&d))
}

pub fn normalized(d: &Dataset) -> Dataset {
    let cfg = PreprocessConfig::default();
    let mut out = d.clone();
    for e in &mut out.examples {
        e.text = normalize(&e.text, &cfg);
    }
    out
}

/// Training and validation sets plus the contextual store, if any.
pub struct Prepared {
    pub train: Dataset,
    pub val: Dataset,
    pub store: Option<ContextualStore>,
}

pub fn prepare(train: &Path, val: Option<&Path>, args: &ModelArgs) -> Result<Prepared> {
    let full = load_normalized(train)?;
    let (train, val) = match val {
        Some(v) => (full, load_normalized(v)?),
        None => split_train_val(&full)?,
    };
    let store = match &args.embeddings {
        Embeddings::Contextual { path } => Some(
            load_contextual(path).with_context(|| format!("loading {}", path.display()))?,
        ),
        _ => None,
    };
    Ok(Prepared { train, val, store })
}

pub fn model_spec(args: &ModelArgs) -> Result<ModelSpec> {
    let embedding = match &args.embeddings {
        Embeddings::Learned => EmbeddingSource::Learned { dim: args.embedding_dim },
        Embeddings::Table { finetune, .. } => EmbeddingSource::Pretrained { finetune: *finetune },
        Embeddings::Contextual { .. } => EmbeddingSource::Contextual,
    };
    let mut spec = ModelSpec::new(embedding, args.model, args.task);
    spec.dropout_rate = args.dropout;
    spec.conv_channels = args.conv_channels;
    spec.hidden = args.hidden;
    spec.lstm_hidden = args.lstm_hidden;
    spec.use_class_weights = args.class_weights;
    spec.max_len = args.max_len;
    spec.validate()?;
    Ok(spec)
}

pub fn train_config(args: &ModelArgs, seed: u64) -> Result<TrainConfig> {
    let cfg = TrainConfig {
        learning_rate: args.lr,
        max_epochs: args.epochs,
        patience: args.patience,
        batch_size: args.batch_size,
        dropout_rate: args.dropout,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Fresh model for `args`; the vocabulary comes from the training split.
pub fn init_model(args: &ModelArgs, data: &Prepared, seed: u64) -> Result<Model<f32>> {
    let spec = model_spec(args)?;
    let vocab = || {
        let tokens: Vec<Vec<String>> = data.train.iter().map(|e| tokenize(&e.text)).collect();
        build_vocab(&tokens, args.min_count)
    };
    let init = match &args.embeddings {
        Embeddings::Learned => EmbeddingInit::Vocab(vocab()?),
        Embeddings::Table { path, .. } => {
            let vocab = vocab()?;
            let matrix = load_pretrained_table(path, &vocab)
                .with_context(|| format!("loading {}", path.display()))?;
            EmbeddingInit::Table { vocab, matrix }
        }
        Embeddings::Contextual { .. } => {
            let store = data.store.as_ref().context("contextual store not loaded")?;
            EmbeddingInit::Contextual { dim: store.dim() }
        }
    };
    Ok(build_model(&spec, init, seed)?)
}

pub struct Trained {
    pub model: Model<f32>,
    pub history: TrainHistory,
    pub val_metrics: Metrics,
}

pub fn train_one(args: &ModelArgs, data: &Prepared, seed: u64) -> Result<Trained> {
    let cfg = train_config(args, seed)?;
    let mut model = init_model(args, data, seed)?;
    let train_set = EncodedSet::new(&model, &data.train, data.store.as_ref())?;
    let val_set = EncodedSet::new(&model, &data.val, data.store.as_ref())?;
    let history = train(&mut model, &train_set, &val_set, &cfg)?;
    let (val_metrics, _, _) = score(&model, &data.val, data.store.as_ref())?;
    Ok(Trained {
        model,
        history,
        val_metrics,
    })
}

/// Predictions and metrics of `model` on an already normalized dataset.
pub fn score(
    model: &Model<f32>,
    d: &Dataset,
    store: Option<&ContextualStore>,
) -> Result<(Metrics, ConfusionMatrix, Vec<Prediction>)> {
    if d.is_empty() {
        bail!("cannot score an empty dataset");
    }
    let task = model.spec.task;
    let set = EncodedSet::new(model, d, store)?;
    let preds = model.predict(&set)?;
    let labels: Vec<usize> = preds.iter().map(|p| p.label).collect();
    let cm = ConfusionMatrix::new(&d.labels(task), &labels, &task.label_space())?;
    Ok((metrics(&cm), cm, preds))
}

/// `id<TAB>label<TAB>p_0 ... p_K-1` with a header.
pub fn predictions_tsv(d: &Dataset, task: Task, preds: &[Prediction]) -> String {
    let space = task.label_space();
    let mut out = String::from("id\tlabel");
    for k in 0..space.len() {
        out.push_str(&format!("\tp_{}", space.name(k)));
    }
    out.push('\n');
    for (e, p) in d.iter().zip(preds) {
        out.push_str(&format!("{}\t{}", e.id, space.name(p.label)));
        for v in &p.probabilities {
            out.push_str(&format!("\t{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn load_store(path: Option<&Path>) -> Result<Option<ContextualStore>> {
    path.map(|p| load_contextual(p).with_context(|| format!("loading {}", p.display())))
        .transpose()
}
