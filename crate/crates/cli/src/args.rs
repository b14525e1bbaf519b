use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use exist_core::corpus::Task;
use exist_core::models::Head;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "exist", version, about = "Sexism identification experiments on EXIST-style corpora")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Normalize the text column of a dataset TSV.
    Preprocess(PreprocessArgs),
    /// Append EDA variants to every example.
    Augment(AugmentArgs),
    /// Train one model and write its checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a labelled dataset.
    Evaluate(EvaluateArgs),
    /// N seeded train/evaluate cycles with averaged metrics.
    Runs(RunsArgs),
    /// Error analysis of one or two checkpoints.
    Analyze(AnalyzeArgs),
    /// Majority-class metrics.
    Baseline(BaselineArgs),
    /// Re-execute a manifest and compare its results bitwise.
    Replay(ReplayArgs),
}

impl Command {
    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Preprocess(a) => Some(&a.out),
            Command::Augment(a) => Some(&a.out),
            Command::Train(a) => Some(&a.out),
            Command::Evaluate(a) => Some(&a.out),
            Command::Runs(a) => Some(&a.out),
            Command::Analyze(a) => Some(&a.out),
            Command::Baseline(a) => a.out.as_ref(),
            Command::Replay(a) => Some(&a.out),
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Preprocess(a) => a.out = dir,
            Command::Augment(a) => a.out = dir,
            Command::Train(a) => a.out = dir,
            Command::Evaluate(a) => a.out = dir,
            Command::Runs(a) => a.out = dir,
            Command::Analyze(a) => a.out = dir,
            Command::Baseline(a) => a.out = Some(dir),
            Command::Replay(a) => a.out = dir,
        }
    }

    /// Makes every input path absolute so a manifest stays valid from any
    /// working directory.
    pub fn absolutize(&mut self) -> std::io::Result<()> {
        let abs = |p: &mut PathBuf| -> std::io::Result<()> {
            *p = std::path::absolute(&*p)?;
            Ok(())
        };
        let opt = |p: &mut Option<PathBuf>| -> std::io::Result<()> {
            if let Some(p) = p {
                *p = std::path::absolute(&*p)?;
            }
            Ok(())
        };
        match self {
            Command::Preprocess(a) => abs(&mut a.input),
            Command::Augment(a) => {
                abs(&mut a.input)?;
                opt(&mut a.lexicon)
            }
            Command::Train(a) => {
                abs(&mut a.train)?;
                opt(&mut a.val)?;
                a.model.embeddings.absolutize()
            }
            Command::Evaluate(a) => {
                abs(&mut a.checkpoint)?;
                abs(&mut a.test)?;
                opt(&mut a.contextual)
            }
            Command::Runs(a) => {
                abs(&mut a.train)?;
                opt(&mut a.val)?;
                abs(&mut a.test)?;
                a.model.embeddings.absolutize()
            }
            Command::Analyze(a) => {
                abs(&mut a.test)?;
                a.checkpoint.iter_mut().try_for_each(abs)?;
                opt(&mut a.contextual)
            }
            Command::Baseline(a) => {
                abs(&mut a.test)?;
                opt(&mut a.reference)
            }
            Command::Replay(a) => abs(&mut a.manifest),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PreprocessArgs {
    /// Dataset TSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory (writes preprocessed.tsv).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "username")]
    pub mention_token: String,
    /// Keep the literal `URL` placeholder token.
    #[arg(long)]
    pub keep_url_literal: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AugmentArgs {
    /// Dataset TSV with normalized texts.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory (writes augmented.tsv).
    #[arg(long)]
    pub out: PathBuf,
    /// Variants per example.
    #[arg(long, default_value_t = 8)]
    pub n_aug: usize,
    /// Fraction of words touched by each operation.
    #[arg(long, default_value_t = 0.05)]
    pub rate: f64,
    /// Comma-separated subset of sr, ri, rs.
    #[arg(long, default_value = "sr,ri,rs")]
    pub ops: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Synonym file, `word<TAB>syn1,syn2` per line.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Normalize texts before augmenting.
    #[arg(long)]
    pub normalize: bool,
}

/// Where the embedding layer comes from: `learned`, `table:PATH`,
/// `table-finetune:PATH` or `contextual:PATH`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Embeddings {
    Learned,
    Table { path: PathBuf, finetune: bool },
    Contextual { path: PathBuf },
}

impl Embeddings {
    fn absolutize(&mut self) -> std::io::Result<()> {
        match self {
            Embeddings::Learned => Ok(()),
            Embeddings::Table { path, .. } | Embeddings::Contextual { path } => {
                *path = std::path::absolute(&*path)?;
                Ok(())
            }
        }
    }
}

impl FromStr for Embeddings {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "learned" {
            return Ok(Embeddings::Learned);
        }
        let (kind, path) = s
            .split_once(':')
            .ok_or_else(|| format!("expected learned, table:PATH, table-finetune:PATH or contextual:PATH, got `{s}`"))?;
        if path.is_empty() {
            return Err(format!("missing path in `{s}`"));
        }
        let path = PathBuf::from(path);
        match kind {
            "table" => Ok(Embeddings::Table { path, finetune: false }),
            "table-finetune" => Ok(Embeddings::Table { path, finetune: true }),
            "contextual" => Ok(Embeddings::Contextual { path }),
            other => Err(format!("unknown embedding kind `{other}`")),
        }
    }
}

impl fmt::Display for Embeddings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Embeddings::Learned => write!(f, "learned"),
            Embeddings::Table { path, finetune: false } => write!(f, "table:{}", path.display()),
            Embeddings::Table { path, finetune: true } => {
                write!(f, "table-finetune:{}", path.display())
            }
            Embeddings::Contextual { path } => write!(f, "contextual:{}", path.display()),
        }
    }
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: exist_core::Error| e.to_string())
}

fn parse_head(s: &str) -> Result<Head, String> {
    s.parse().map_err(|e: exist_core::Error| e.to_string())
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1)"))
    }
}

/// Model and optimisation flags shared by `train` and `runs`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_parser = parse_task, default_value = "1")]
    pub task: Task,
    /// nbow, lstm, bilstm, cnn or multicnn.
    #[arg(long, value_parser = parse_head, default_value = "multicnn")]
    pub model: Head,
    #[arg(long, default_value = "learned")]
    pub embeddings: Embeddings,
    /// Width of learned embeddings.
    #[arg(long, default_value_t = 100)]
    pub embedding_dim: usize,
    /// Weight the loss by inverse class frequency.
    #[arg(long)]
    pub class_weights: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 15)]
    pub patience: usize,
    #[arg(long, value_parser = unit_interval, default_value = "0.2")]
    pub dropout: f64,
    #[arg(long, default_value_t = 5e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 128)]
    pub max_len: usize,
    /// Filters per convolution width.
    #[arg(long, default_value_t = 100)]
    pub conv_channels: usize,
    /// Width of the dense layer before the output.
    #[arg(long, default_value_t = 100)]
    pub hidden: usize,
    #[arg(long, default_value_t = 100)]
    pub lstm_hidden: usize,
    /// Minimum training-set frequency for a vocabulary word.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Validation TSV; defaults to the last 20% of --train.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// CEMB store for contextual models.
    #[arg(long)]
    pub contextual: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RunsArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub test: PathBuf,
    /// Number of runs; run i uses seed --seed + i.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub test: PathBuf,
    /// One checkpoint per task (at most two).
    #[arg(long, required = true, num_args = 1)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub contextual: Option<PathBuf>,
    /// Extra term filter, `name=any:w1,w2` or `name=prefix:p`.
    #[arg(long)]
    pub filter: Vec<String>,
    /// Skip the feminine/feminis/profanity filters.
    #[arg(long)]
    pub no_builtin_filters: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_parser = parse_task, default_value = "1")]
    pub task: Task,
    /// Take the majority label from this dataset instead of --test.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
