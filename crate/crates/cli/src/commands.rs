use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use exist_core::analysis::{analyze, TermFilter};
use exist_core::augment::{augment_dataset, EdaConfig, EdaOp, Lexicon};
use exist_core::corpus::{load_dataset, Task};
use exist_core::eval::{average_runs, majority_baseline, MetricsReport};
use exist_core::models::Model;
use exist_core::preprocess::{normalize, PreprocessConfig, DEFAULT_PUNCTUATION};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    AnalyzeArgs, AugmentArgs, BaselineArgs, Command, Embeddings, EvaluateArgs, PreprocessArgs,
    ReplayArgs, RunsArgs, TrainArgs,
};
use crate::manifest::{RunManifest, RunRecord, MANIFEST_FILE};
use crate::pipeline::{self, load_normalized, load_store, predictions_tsv, score, train_one};

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    Ok((serde_json::to_string_pretty(value)? + "\n").into_bytes())
}

/// Runs `cmd` and returns its manifest (already written when the command
/// has an output directory).
pub fn execute(mut cmd: Command) -> Result<RunManifest> {
    if let Command::Replay(args) = cmd {
        return replay(&args);
    }
    cmd.absolutize()?;
    let mut manifest = RunManifest::new(cmd.clone());
    match &cmd {
        Command::Preprocess(a) => preprocess(a, &mut manifest)?,
        Command::Augment(a) => augment(a, &mut manifest)?,
        Command::Train(a) => train(a, &mut manifest)?,
        Command::Evaluate(a) => evaluate(a, &mut manifest)?,
        Command::Runs(a) => runs(a, &mut manifest)?,
        Command::Analyze(a) => analyze_cmd(a, &mut manifest)?,
        Command::Baseline(a) => baseline(a, &mut manifest)?,
        Command::Replay(_) => unreachable!("handled above"),
    }
    if let Some(out) = cmd.out_dir() {
        manifest.finish(out)?;
    }
    Ok(manifest)
}

fn preprocess(a: &PreprocessArgs, m: &mut RunManifest) -> Result<()> {
    m.add_input("input", &a.input)?;
    let cfg = PreprocessConfig::new(DEFAULT_PUNCTUATION.chars(), a.mention_token.clone(), !a.keep_url_literal)?;
    let mut d = load_dataset(&a.input)?;
    for e in &mut d.examples {
        e.text = normalize(&e.text, &cfg);
    }
    m.write_output(&a.out, "preprocessed.tsv", d.to_tsv()?.as_bytes())?;
    eprintln!("normalized {} examples", d.len());
    Ok(())
}

fn augment(a: &AugmentArgs, m: &mut RunManifest) -> Result<()> {
    m.add_input("input", &a.input)?;
    let ops = a
        .ops
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<exist_core::Result<Vec<EdaOp>>>()?;
    let cfg = EdaConfig::new(a.rate, a.n_aug, ops, a.seed)?;
    let lex = match &a.lexicon {
        Some(p) => {
            m.add_input("lexicon", p)?;
            Lexicon::load(p)?
        }
        None => Lexicon::default(),
    };
    let d = if a.normalize {
        load_normalized(&a.input)?
    } else {
        load_dataset(&a.input)?
    };
    m.seeds.push(a.seed);
    let out = augment_dataset(&d, &cfg, &lex);
    m.write_output(&a.out, "augmented.tsv", out.to_tsv()?.as_bytes())?;
    eprintln!("{} examples -> {}", d.len(), out.len());
    Ok(())
}

fn add_training_inputs(
    m: &mut RunManifest,
    train: &Path,
    val: Option<&Path>,
    emb: &Embeddings,
) -> Result<()> {
    m.add_input("train", train)?;
    if let Some(v) = val {
        m.add_input("val", v)?;
    }
    match emb {
        Embeddings::Learned => {}
        Embeddings::Table { path, .. } => m.add_input("embeddings", path)?,
        Embeddings::Contextual { path } => m.add_input("contextual", path)?,
    }
    Ok(())
}

fn train(a: &TrainArgs, m: &mut RunManifest) -> Result<()> {
    add_training_inputs(m, &a.train, a.val.as_deref(), &a.model.embeddings)?;
    let data = pipeline::prepare(&a.train, a.val.as_deref(), &a.model)?;
    let seed = a.model.seed;
    let t = train_one(&a.model, &data, seed)?;
    m.seeds.push(seed);
    m.write_output(&a.out, "model.ckpt", &t.model.to_checkpoint_bytes())?;
    m.write_output(&a.out, "history.json", &json(&t.history)?)?;
    m.write_output(&a.out, "spec.txt", t.model.spec.to_text().as_bytes())?;
    m.runs.push(RunRecord {
        seed,
        best_epoch: Some(t.history.best_epoch),
        stopped_epoch: Some(t.history.stopped_epoch),
        metrics: t.val_metrics,
    });
    eprintln!(
        "best epoch {} of {}; validation accuracy {:.4}",
        t.history.best_epoch, t.history.stopped_epoch, t.val_metrics.accuracy
    );
    Ok(())
}

fn evaluate(a: &EvaluateArgs, m: &mut RunManifest) -> Result<()> {
    m.add_input("checkpoint", &a.checkpoint)?;
    m.add_input("test", &a.test)?;
    if let Some(p) = &a.contextual {
        m.add_input("contextual", p)?;
    }
    let model = Model::<f32>::load(&a.checkpoint)
        .with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let store = load_store(a.contextual.as_deref())?;
    let test = load_normalized(&a.test)?;
    let (metrics, cm, preds) = score(&model, &test, store.as_ref())?;
    let report = MetricsReport::new(&metrics, &cm);
    m.write_output(&a.out, "metrics.json", &json(&report)?)?;
    m.write_output(&a.out, "predictions.tsv", predictions_tsv(&test, model.spec.task, &preds).as_bytes())?;
    m.runs.push(RunRecord {
        seed: 0,
        best_epoch: None,
        stopped_epoch: None,
        metrics,
    });
    print!("{}", String::from_utf8(json(&report)?)?);
    Ok(())
}

#[derive(Serialize)]
struct RunsSummary<'a> {
    runs: &'a [RunRecord],
    averaged: exist_core::Metrics,
}

fn runs(a: &RunsArgs, m: &mut RunManifest) -> Result<()> {
    add_training_inputs(m, &a.train, a.val.as_deref(), &a.model.embeddings)?;
    m.add_input("test", &a.test)?;
    let data = pipeline::prepare(&a.train, a.val.as_deref(), &a.model)?;
    let test = load_normalized(&a.test)?;
    let seeds: Vec<u64> = (0..a.n).map(|i| a.model.seed.wrapping_add(i)).collect();
    let results = seeds
        .par_iter()
        .map(|&seed| -> Result<_> {
            let t = train_one(&a.model, &data, seed)?;
            let (metrics, cm, _) = score(&t.model, &test, data.store.as_ref())?;
            log::info!("seed {seed}: test accuracy {:.4}", metrics.accuracy);
            Ok((seed, t, metrics, cm))
        })
        .collect::<Result<Vec<_>>>()?;
    for (seed, t, metrics, cm) in &results {
        let dir = format!("run-{seed}");
        m.write_output(&a.out, &format!("{dir}/model.ckpt"), &t.model.to_checkpoint_bytes())?;
        m.write_output(&a.out, &format!("{dir}/history.json"), &json(&t.history)?)?;
        m.write_output(&a.out, &format!("{dir}/metrics.json"), &json(&MetricsReport::new(metrics, cm))?)?;
        m.runs.push(RunRecord {
            seed: *seed,
            best_epoch: Some(t.history.best_epoch),
            stopped_epoch: Some(t.history.stopped_epoch),
            metrics: *metrics,
        });
    }
    let all: Vec<_> = m.runs.iter().map(|r| r.metrics).collect();
    let averaged = average_runs(&all)?;
    m.seeds = seeds;
    m.averaged = Some(averaged);
    let summary = json(&RunsSummary {
        runs: &m.runs,
        averaged,
    })?;
    m.write_output(&a.out, "summary.json", &summary)?;
    print!("{}", String::from_utf8(json(&averaged)?)?);
    Ok(())
}

fn analyze_cmd(a: &AnalyzeArgs, m: &mut RunManifest) -> Result<()> {
    if a.checkpoint.len() > 2 {
        bail!("at most two checkpoints (one per task)");
    }
    m.add_input("test", &a.test)?;
    let store = load_store(a.contextual.as_deref())?;
    if let Some(p) = &a.contextual {
        m.add_input("contextual", p)?;
    }
    let raw = load_dataset(&a.test)?;
    let test = pipeline::normalized(&raw);
    let mut preds: [Option<Vec<usize>>; 2] = [None, None];
    for (i, path) in a.checkpoint.iter().enumerate() {
        m.add_input(&format!("checkpoint{}", i + 1), path)?;
        let model = Model::<f32>::load(path).with_context(|| format!("loading {}", path.display()))?;
        let slot = match model.spec.task {
            Task::Task1 => 0,
            Task::Task2 => 1,
        };
        if preds[slot].is_some() {
            bail!("two checkpoints for task {}", model.spec.task);
        }
        let (metrics, _, p) = score(&model, &test, store.as_ref())?;
        m.runs.push(RunRecord {
            seed: 0,
            best_epoch: None,
            stopped_epoch: None,
            metrics,
        });
        preds[slot] = Some(p.into_iter().map(|p| p.label).collect());
    }
    let mut filters = if a.no_builtin_filters {
        Vec::new()
    } else {
        TermFilter::builtins()
    };
    for f in &a.filter {
        filters.push(TermFilter::parse(f)?);
    }
    let report = analyze(&raw, preds[0].as_deref(), preds[1].as_deref(), &filters)?;
    let text = report.render_text();
    m.write_output(&a.out, "analysis.json", &json(&report)?)?;
    m.write_output(&a.out, "analysis.txt", text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn baseline(a: &BaselineArgs, m: &mut RunManifest) -> Result<()> {
    m.add_input("test", &a.test)?;
    let test = load_dataset(&a.test)?;
    let reference = match &a.reference {
        Some(p) => {
            m.add_input("reference", p)?;
            Some(load_dataset(p)?)
        }
        None => None,
    };
    let (metrics, cm) = majority_baseline(&test, a.task, reference.as_ref())?;
    let report = MetricsReport::new(&metrics, &cm);
    m.runs.push(RunRecord {
        seed: 0,
        best_epoch: None,
        stopped_epoch: None,
        metrics,
    });
    if let Some(out) = &a.out {
        m.write_output(out, "metrics.json", &json(&report)?)?;
    }
    print!("{}", String::from_utf8(json(&report)?)?);
    Ok(())
}

fn replay(a: &ReplayArgs) -> Result<RunManifest> {
    let source = if a.manifest.is_dir() {
        a.manifest.join(MANIFEST_FILE)
    } else {
        a.manifest.clone()
    };
    let old = RunManifest::load(&source)?;
    for (role, digest) in &old.inputs {
        let now = crate::manifest::digest_file(Path::new(&digest.path))?;
        if now.sha256 != digest.sha256 {
            bail!("input {role} ({}) changed since the manifest was written", digest.path);
        }
    }
    let mut cmd = old.config.clone();
    if matches!(cmd, Command::Replay(_)) {
        bail!("a replay manifest cannot be replayed");
    }
    fs::create_dir_all(&a.out)?;
    cmd.set_out_dir(std::path::absolute(&a.out)?);
    let new = execute(cmd)?;
    let diffs = old.result_differences(&new);
    if !diffs.is_empty() {
        bail!("replay differs from {}:\n  {}", source.display(), diffs.join("\n  "));
    }
    eprintln!("replay matches {} bitwise", source.display());
    Ok(new)
}
