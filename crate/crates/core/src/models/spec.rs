use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::embed::{DEFAULT_EMBEDDING_DIM, DEFAULT_MAX_LEN};
use crate::error::{Error, Result};

/// Where token vectors come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Randomly initialised, trained table of width `dim`.
    Learned { dim: usize },
    /// Pretrained word-vector table; `finetune == false` freezes it.
    Pretrained { finetune: bool },
    /// Precomputed per-token vectors from a CEMB store.
    Contextual,
}

impl EmbeddingSource {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingSource::Learned { .. } => "learned",
            EmbeddingSource::Pretrained { .. } => "pretrained",
            EmbeddingSource::Contextual => "contextual",
        }
    }

    pub fn uses_vocab(self) -> bool {
        !matches!(self, EmbeddingSource::Contextual)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Nbow,
    Lstm,
    Bilstm,
    Cnn,
    Multicnn,
}

impl Head {
    pub const ALL: [Head; 5] = [Head::Nbow, Head::Lstm, Head::Bilstm, Head::Cnn, Head::Multicnn];

    /// Convolution widths; empty for non-convolutional heads.
    pub fn widths(self) -> &'static [usize] {
        match self {
            Head::Cnn => &[6],
            Head::Multicnn => &[4, 6, 8],
            _ => &[],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Head::Nbow => "nbow",
            Head::Lstm => "lstm",
            Head::Bilstm => "bilstm",
            Head::Cnn => "cnn",
            Head::Multicnn => "multicnn",
        }
    }
}

impl FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Head::ALL
            .into_iter()
            .find(|h| h.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown head `{s}`")))
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Declarative architecture description. Text form is `key = value` lines:
///
/// ```text
/// embedding = learned
/// embedding_dim = 100
/// head = multicnn
/// task = 1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub embedding: EmbeddingSource,
    pub head: Head,
    pub task: Task,
    pub dropout_rate: f64,
    pub conv_channels: usize,
    pub hidden: usize,
    pub lstm_hidden: usize,
    pub use_class_weights: bool,
    pub max_len: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            embedding: EmbeddingSource::Learned {
                dim: DEFAULT_EMBEDDING_DIM,
            },
            head: Head::Multicnn,
            task: Task::Task1,
            dropout_rate: 0.2,
            conv_channels: 100,
            hidden: 100,
            lstm_hidden: 100,
            use_class_weights: false,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

const KEYS: [&str; 11] = [
    "embedding",
    "embedding_dim",
    "finetune",
    "head",
    "task",
    "dropout",
    "conv_channels",
    "hidden",
    "lstm_hidden",
    "class_weights",
    "max_len",
];

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

impl ModelSpec {
    pub fn new(embedding: EmbeddingSource, head: Head, task: Task) -> Self {
        ModelSpec {
            embedding,
            head,
            task,
            ..Default::default()
        }
    }

    /// Output layer width: 1 (sigmoid) for task 1, 6 (softmax) for task 2.
    pub fn output_width(&self) -> usize {
        match self.task {
            Task::Task1 => 1,
            Task::Task2 => self.task.num_classes(),
        }
    }

    /// Width of the head's sentence representation for input width `dim`.
    pub fn head_width(&self, dim: usize) -> usize {
        match self.head {
            Head::Nbow => dim,
            Head::Lstm => self.lstm_hidden,
            Head::Bilstm => 2 * self.lstm_hidden,
            Head::Cnn | Head::Multicnn => self.head.widths().len() * self.conv_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout_rate)));
        }
        if let EmbeddingSource::Learned { dim: 0 } = self.embedding {
            return Err(Error::Config("embedding_dim must be positive".into()));
        }
        for (name, v) in [
            ("conv_channels", self.conv_channels),
            ("hidden", self.hidden),
            ("lstm_hidden", self.lstm_hidden),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let widest = self.head.widths().iter().copied().max().unwrap_or(1);
        if self.max_len < widest {
            return Err(Error::Config(format!(
                "max_len {} shorter than conv width {widest}",
                self.max_len
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut kind: Option<String> = None;
        let mut dim = DEFAULT_EMBEDDING_DIM;
        let mut finetune = false;
        let mut spec = ModelSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", i + 1)));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: repeated key `{key}`", i + 1)));
            }
            match key {
                "embedding" => kind = Some(value.to_ascii_lowercase()),
                "embedding_dim" => dim = parse_value(key, value)?,
                "finetune" => finetune = parse_value(key, value)?,
                "head" => spec.head = value.parse()?,
                "task" => spec.task = value.parse()?,
                "dropout" => spec.dropout_rate = parse_value(key, value)?,
                "conv_channels" => spec.conv_channels = parse_value(key, value)?,
                "hidden" => spec.hidden = parse_value(key, value)?,
                "lstm_hidden" => spec.lstm_hidden = parse_value(key, value)?,
                "class_weights" => spec.use_class_weights = parse_value(key, value)?,
                "max_len" => spec.max_len = parse_value(key, value)?,
                _ => unreachable!(),
            }
        }
        spec.embedding = match kind.as_deref().unwrap_or("learned") {
            "learned" => EmbeddingSource::Learned { dim },
            "pretrained" => EmbeddingSource::Pretrained { finetune },
            "contextual" => EmbeddingSource::Contextual,
            other => return Err(Error::Config(format!("unknown embedding source `{other}`"))),
        };
        let stray = |k: &str| seen.contains(k);
        if stray("embedding_dim") && !matches!(spec.embedding, EmbeddingSource::Learned { .. }) {
            return Err(Error::Config("embedding_dim applies to learned embeddings only".into()));
        }
        if stray("finetune") && !matches!(spec.embedding, EmbeddingSource::Pretrained { .. }) {
            return Err(Error::Config("finetune applies to pretrained embeddings only".into()));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("embedding = {}\n", self.embedding.name());
        match self.embedding {
            EmbeddingSource::Learned { dim } => out.push_str(&format!("embedding_dim = {dim}\n")),
            EmbeddingSource::Pretrained { finetune } => {
                out.push_str(&format!("finetune = {finetune}\n"))
            }
            EmbeddingSource::Contextual => {}
        }
        out.push_str(&format!(
            "head = {}\ntask = {}\ndropout = {}\nconv_channels = {}\nhidden = {}\nlstm_hidden = {}\nclass_weights = {}\nmax_len = {}\n",
            self.head,
            self.task.number(),
            self.dropout_rate,
            self.conv_channels,
            self.hidden,
            self.lstm_hidden,
            self.use_class_weights,
            self.max_len
        ));
        out
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelSpec::parse(s)
    }
}
