use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{Dataset, Task};
use crate::embed::{encode, ContextualEntry, ContextualStore, EmbeddingMatrix, Vocab};
use crate::error::{Error, Result};
use crate::preprocess::tokenize;
use crate::tensornet::{Graph, NodeId, ParamId, ParamStore, Parameter, Scalar, Tensor};

use super::spec::{EmbeddingSource, Head, ModelSpec};

/// What the embedding layer is built from.
#[derive(Debug, Clone)]
pub enum EmbeddingInit {
    /// Learned table over this vocabulary.
    Vocab(Vocab),
    /// Pretrained rows aligned with `vocab` ids.
    Table { vocab: Vocab, matrix: EmbeddingMatrix },
    /// Width of the contextual vectors.
    Contextual { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LstmIds {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum HeadIds {
    Nbow,
    Lstm { forward: LstmIds, backward: Option<LstmIds> },
    Conv(Vec<(ParamId, ParamId)>),
}

/// Parameter ids for one architecture, in allocation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub embedding: Option<ParamId>,
    pub head: HeadIds,
    pub hidden_w: ParamId,
    pub hidden_b: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
}

/// Allocates every parameter of `spec` in a fixed order; `init` supplies
/// the value for a name and shape.
pub(crate) fn allocate<S: Scalar>(
    spec: &ModelSpec,
    input_dim: usize,
    vocab_rows: usize,
    store: &mut ParamStore<S>,
    mut init: impl FnMut(&str, &[usize]) -> Result<Tensor<S>>,
) -> Result<Layout> {
    let mut add = |store: &mut ParamStore<S>, name: &str, shape: &[usize]| -> Result<ParamId> {
        let value = init(name, shape)?;
        if value.shape() != shape {
            return Err(Error::Shape(format!(
                "parameter {name}: expected {shape:?}, got {:?}",
                value.shape()
            )));
        }
        let mut p = Parameter::new(name, value);
        if name == "embedding" {
            p = p.with_pad_row().frozen(matches!(
                spec.embedding,
                EmbeddingSource::Pretrained { finetune: false }
            ));
        }
        Ok(store.add(p))
    };
    let embedding = if spec.embedding.uses_vocab() {
        Some(add(store, "embedding", &[vocab_rows, input_dim])?)
    } else {
        None
    };
    let d = input_dim;
    let h = spec.lstm_hidden;
    let mut lstm = |store: &mut ParamStore<S>, dir: &str| -> Result<LstmIds> {
        Ok(LstmIds {
            wx: add(store, &format!("lstm_{dir}.wx"), &[d, 4 * h])?,
            wh: add(store, &format!("lstm_{dir}.wh"), &[h, 4 * h])?,
            b: add(store, &format!("lstm_{dir}.b"), &[4 * h])?,
        })
    };
    let head = match spec.head {
        Head::Nbow => HeadIds::Nbow,
        Head::Lstm => HeadIds::Lstm {
            forward: lstm(store, "fw")?,
            backward: None,
        },
        Head::Bilstm => {
            let forward = lstm(store, "fw")?;
            let backward = Some(lstm(store, "bw")?);
            HeadIds::Lstm { forward, backward }
        }
        Head::Cnn | Head::Multicnn => {
            let c = spec.conv_channels;
            let mut blocks = Vec::new();
            for &w in spec.head.widths() {
                let f = add(store, &format!("conv{w}.filters"), &[c, w, d])?;
                let b = add(store, &format!("conv{w}.bias"), &[c])?;
                blocks.push((f, b));
            }
            HeadIds::Conv(blocks)
        }
    };
    let width = spec.head_width(d);
    let hidden_w = add(store, "hidden.w", &[width, spec.hidden])?;
    let hidden_b = add(store, "hidden.b", &[spec.hidden])?;
    let out_w = add(store, "output.w", &[spec.hidden, spec.output_width()])?;
    let out_b = add(store, "output.b", &[spec.output_width()])?;
    Ok(Layout {
        embedding,
        head,
        hidden_w,
        hidden_b,
        out_w,
        out_b,
    })
}

fn glorot<S: Scalar>(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<S> {
    let (fan_in, fan_out) = match *shape {
        [i, o] => (i, o),
        // conv filters F×w×D
        [f, w, d] => (w * d, w * f),
        _ => (1, 1),
    };
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(shape, limit, rng)
}

fn uniform<S: Scalar>(shape: &[usize], limit: f64, rng: &mut ChaCha8Rng) -> Tensor<S> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| S::lit(rng.random_range(-limit..limit))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape product")
}

/// A model of the zoo with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S: Scalar = f32> {
    pub spec: ModelSpec,
    pub params: ParamStore<S>,
    pub(crate) layout: Layout,
    pub(crate) vocab: Option<Vocab>,
    pub(crate) input_dim: usize,
}

/// Builds and initialises a model: Glorot-uniform kernels, zero biases,
/// uniform(−0.05, 0.05) learned embeddings with a zero PAD row.
pub fn build_model<S: Scalar>(spec: &ModelSpec, init: EmbeddingInit, seed: u64) -> Result<Model<S>> {
    spec.validate()?;
    let (vocab, table, input_dim) = match (spec.embedding, init) {
        (EmbeddingSource::Learned { dim }, EmbeddingInit::Vocab(v)) => (Some(v), None, dim),
        (EmbeddingSource::Pretrained { .. }, EmbeddingInit::Table { vocab, matrix }) => {
            if matrix.rows != vocab.len() {
                return Err(Error::Config(format!(
                    "pretrained table has {} rows for a vocab of {}",
                    matrix.rows,
                    vocab.len()
                )));
            }
            let dim = matrix.dim;
            (Some(vocab), Some(matrix), dim)
        }
        (EmbeddingSource::Contextual, EmbeddingInit::Contextual { dim }) => (None, None, dim),
        (src, _) => {
            return Err(Error::Config(format!(
                "{} embeddings need a matching initialiser",
                src.name()
            )))
        }
    };
    if input_dim == 0 {
        return Err(Error::Config("input width is zero".into()));
    }
    let rows = vocab.as_ref().map_or(0, Vocab::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let layout = allocate(spec, input_dim, rows, &mut params, |name, shape| {
        Ok(if name == "embedding" {
            let mut t = match &table {
                Some(m) => Tensor::new(
                    shape.to_vec(),
                    m.values.iter().map(|&v| S::from_f32(v)).collect(),
                )?,
                None => uniform(shape, 0.05, &mut rng),
            };
            t.data_mut()[..shape[1]].iter_mut().for_each(|v| *v = S::zero());
            t
        } else if shape.len() == 1 {
            Tensor::zeros(shape.to_vec())
        } else {
            glorot(shape, &mut rng)
        })
    })?;
    Ok(Model {
        spec: spec.clone(),
        params,
        layout,
        vocab,
        input_dim,
    })
}

/// Model inputs for one batch.
#[derive(Debug, Clone, PartialEq)]
pub enum Inputs<S> {
    /// `batch × len` token ids.
    Tokens { ids: Vec<u32>, batch: usize, len: usize },
    /// `B×L×D` vectors.
    Vectors(Tensor<S>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch<S> {
    pub inputs: Inputs<S>,
    /// Real (unpadded) length of every row.
    pub lengths: Vec<usize>,
    pub labels: Vec<usize>,
}

impl<S> Batch<S> {
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }
}

#[derive(Debug, Clone)]
enum Rows<'a> {
    Tokens(Vec<Vec<u32>>),
    Vectors { dim: usize, entries: Vec<&'a ContextualEntry> },
}

/// A dataset encoded for one model; contextual vectors are borrowed from
/// the store.
#[derive(Debug, Clone)]
pub struct EncodedSet<'a> {
    ids: Vec<String>,
    labels: Vec<usize>,
    lengths: Vec<usize>,
    rows: Rows<'a>,
    max_len: usize,
    task: Task,
}

impl<'a> EncodedSet<'a> {
    /// Encodes normalized texts for `model`. Contextual models look every
    /// id up in `store`.
    pub fn new<S: Scalar>(
        model: &Model<S>,
        data: &Dataset,
        store: Option<&'a ContextualStore>,
    ) -> Result<Self> {
        let max_len = model.spec.max_len;
        let task = model.spec.task;
        let labels = data.labels(task);
        let ids: Vec<String> = data.iter().map(|e| e.id.clone()).collect();
        let (rows, lengths) = match (&model.vocab, store) {
            (Some(vocab), _) => {
                let mut lengths = Vec::with_capacity(data.len());
                let rows = data
                    .iter()
                    .map(|e| {
                        let toks = tokenize(&e.text);
                        lengths.push(toks.len().min(max_len));
                        encode(&toks, vocab, max_len)
                    })
                    .collect();
                (Rows::Tokens(rows), lengths)
            }
            (None, Some(store)) => {
                if store.dim() != model.input_dim {
                    return Err(Error::Config(format!(
                        "store width {} but model expects {}",
                        store.dim(),
                        model.input_dim
                    )));
                }
                let entries = ids
                    .iter()
                    .map(|id| {
                        store
                            .get(id)
                            .ok_or_else(|| Error::Config(format!("no contextual vectors for `{id}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let lengths = entries.iter().map(|e| e.len.min(max_len)).collect();
                (
                    Rows::Vectors {
                        dim: store.dim(),
                        entries,
                    },
                    lengths,
                )
            }
            (None, None) => {
                return Err(Error::Config("contextual model needs an embedding store".into()))
            }
        };
        Ok(EncodedSet {
            ids,
            labels,
            lengths,
            rows,
            max_len,
            task,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Gathers `indices` into a padded batch.
    pub fn batch<S: Scalar>(&self, indices: &[usize]) -> Batch<S> {
        let l = self.max_len;
        let inputs = match &self.rows {
            Rows::Tokens(rows) => Inputs::Tokens {
                ids: indices.iter().flat_map(|&i| rows[i].iter().copied()).collect(),
                batch: indices.len(),
                len: l,
            },
            Rows::Vectors { dim, entries } => {
                let d = *dim;
                let mut data = vec![S::zero(); indices.len() * l * d];
                for (b, &i) in indices.iter().enumerate() {
                    let n = self.lengths[i] * d;
                    let dst = &mut data[b * l * d..b * l * d + n];
                    for (o, &v) in dst.iter_mut().zip(&entries[i].data[..n]) {
                        *o = S::from_f32(v);
                    }
                }
                Inputs::Vectors(Tensor::new([indices.len(), l, d], data).expect("batch shape"))
            }
        };
        Batch {
            inputs,
            lengths: indices.iter().map(|&i| self.lengths[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Probabilities and hard label for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub label: usize,
}

fn sigmoid_open(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    // keep the open interval when the logit saturates f64
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Converts output logits into a prediction: task 1 is sexist iff
/// `p ≥ 0.5`; task 2 takes the first maximal class.
pub fn prediction_from_logits(task: Task, logits: &[f64]) -> Prediction {
    match task {
        Task::Task1 => {
            let p = sigmoid_open(logits[0]);
            Prediction {
                probabilities: vec![1.0 - p, p],
                label: usize::from(p >= 0.5),
            }
        }
        Task::Task2 => {
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            let probabilities: Vec<f64> = exps.iter().map(|e| e / z).collect();
            let mut label = 0;
            for (i, &p) in probabilities.iter().enumerate() {
                if p > probabilities[label] {
                    label = i;
                }
            }
            Prediction { probabilities, label }
        }
    }
}

const PREDICT_BATCH: usize = 64;

impl<S: Scalar> Model<S> {
    pub fn vocab(&self) -> Option<&Vocab> {
        self.vocab.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of convolution parameter blocks (filters + bias pairs).
    pub fn conv_blocks(&self) -> Vec<&[usize]> {
        match &self.layout.head {
            HeadIds::Conv(blocks) => blocks
                .iter()
                .map(|(f, _)| self.params.get(*f).value.shape())
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn embedding_param(&self) -> Option<ParamId> {
        self.layout.embedding
    }

    /// Records the forward pass up to the output logits (`B×1` or `B×6`).
    pub fn logits<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_, S>,
        batch: &Batch<S>,
        dropout: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<NodeId> {
        let x = match (&batch.inputs, self.layout.embedding) {
            (Inputs::Tokens { ids, batch, len }, Some(table)) => {
                let t = g.param(table);
                g.embedding(t, ids, *batch, *len)?
            }
            (Inputs::Vectors(t), None) => {
                if t.rank() != 3 || t.shape()[2] != self.input_dim {
                    return Err(Error::Shape(format!(
                        "input {:?} for width {}",
                        t.shape(),
                        self.input_dim
                    )));
                }
                g.input(t.clone())
            }
            _ => return Err(Error::Config("batch inputs do not match the embedding source".into())),
        };
        let lengths = &batch.lengths;
        let head = match &self.layout.head {
            HeadIds::Nbow => g.masked_mean(x, lengths)?,
            HeadIds::Lstm { forward, backward } => {
                let run = |g: &mut Graph<'_, S>, ids: &LstmIds, reverse| {
                    let (wx, wh, b) = (g.param(ids.wx), g.param(ids.wh), g.param(ids.b));
                    g.lstm(x, wx, wh, b, lengths, reverse)
                };
                let fw = run(g, forward, false)?;
                match backward {
                    Some(bw) => {
                        let bw = run(g, bw, true)?;
                        g.concat(&[fw, bw])?
                    }
                    None => fw,
                }
            }
            HeadIds::Conv(blocks) => {
                let mut pooled = Vec::with_capacity(blocks.len());
                for &(f, b) in blocks {
                    let (f, b) = (g.param(f), g.param(b));
                    let c = g.conv1d(x, f, b)?;
                    let r = g.relu(c);
                    pooled.push(g.max_pool_time(r)?);
                }
                if pooled.len() == 1 {
                    pooled[0]
                } else {
                    g.concat(&pooled)?
                }
            }
        };
        let l = &self.layout;
        let h = g.dropout(head, dropout, train, rng);
        let (hw, hb) = (g.param(l.hidden_w), g.param(l.hidden_b));
        let z = g.dense(h, hw, hb)?;
        let z = g.relu(z);
        let z = g.dropout(z, dropout, train, rng);
        let (ow, ob) = (g.param(l.out_w), g.param(l.out_b));
        g.dense(z, ow, ob)
    }

    /// Training loss node for a batch: binary or categorical cross-entropy,
    /// optionally weighted per class.
    pub fn loss_node(
        &self,
        g: &mut Graph<'_, S>,
        logits: NodeId,
        labels: &[usize],
        class_weights: Option<&[f64]>,
    ) -> Result<NodeId> {
        let weights: Option<Vec<S>> =
            class_weights.map(|w| labels.iter().map(|&y| S::lit(w[y])).collect());
        match self.spec.task {
            Task::Task1 => {
                let targets: Vec<S> = labels.iter().map(|&y| S::lit(y as f64)).collect();
                g.sigmoid_bce(logits, &targets, weights.as_deref())
            }
            Task::Task2 => g.softmax_ce(logits, labels, weights.as_deref()),
        }
    }

    /// Inference-mode logits for a batch, as `f64` rows.
    pub fn batch_logits(&self, batch: &Batch<S>) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new(&self.params);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.logits(&mut g, batch, 0.0, false, &mut rng)?;
        let k = self.spec.output_width();
        Ok(g
            .value(out)
            .data()
            .chunks_exact(k)
            .map(|r| r.iter().map(|v| v.as_f64()).collect())
            .collect())
    }

    /// Predictions in dataset order. Batches run in parallel; each is
    /// computed independently so the result does not depend on scheduling.
    pub fn predict(&self, data: &EncodedSet<'_>) -> Result<Vec<Prediction>> {
        if data.task() != self.spec.task {
            return Err(Error::Config(format!(
                "data encoded for {} but model predicts {}",
                data.task(),
                self.spec.task
            )));
        }
        let indices: Vec<usize> = (0..data.len()).collect();
        let parts = indices
            .par_chunks(PREDICT_BATCH)
            .map(|chunk| {
                let batch = data.batch::<S>(chunk);
                let rows = self.batch_logits(&batch)?;
                Ok(rows
                    .iter()
                    .map(|r| prediction_from_logits(self.spec.task, r))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.into_iter().flatten().collect())
    }

    /// Fraction of examples whose predicted label equals the gold label.
    pub fn accuracy(&self, data: &EncodedSet<'_>) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Size("accuracy of an empty set".into()));
        }
        let preds = self.predict(data)?;
        let hits = preds
            .iter()
            .zip(data.labels())
            .filter(|(p, &y)| p.label == y)
            .count();
        Ok(hits as f64 / data.len() as f64)
    }
}
