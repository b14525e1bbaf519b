use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use exist_core::Metrics;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub best_epoch: Option<usize>,
    pub stopped_epoch: Option<usize>,
    pub metrics: Metrics,
}

/// Everything needed to re-run a command and check its results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: Command,
    pub seeds: Vec<u64>,
    /// Input role → file digest.
    pub inputs: IndexMap<String, FileDigest>,
    pub runs: Vec<RunRecord>,
    pub averaged: Option<Metrics>,
    /// Output file (relative to the out dir) → sha256.
    pub outputs: IndexMap<String, String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

impl RunManifest {
    pub fn new(config: Command) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seeds: Vec::new(),
            inputs: IndexMap::new(),
            runs: Vec::new(),
            averaged: None,
            outputs: IndexMap::new(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.insert(role.to_string(), digest_file(path)?);
        Ok(())
    }

    /// Writes `bytes` to `out/name` and records its digest.
    pub fn write_output(&mut self, out: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let path = out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn finish(&mut self, out: &Path) -> Result<()> {
        self.finished_unix_ms = now_ms();
        fs::create_dir_all(out)?;
        let path = out.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Differences in results against `other` (bitwise on metrics).
    pub fn result_differences(&self, other: &RunManifest) -> Vec<String> {
        let mut diffs = Vec::new();
        if self.seeds != other.seeds {
            diffs.push(format!("seeds {:?} vs {:?}", self.seeds, other.seeds));
        }
        if self.runs.len() != other.runs.len() {
            diffs.push(format!("{} runs vs {}", self.runs.len(), other.runs.len()));
        }
        for (a, b) in self.runs.iter().zip(&other.runs) {
            if a.best_epoch != b.best_epoch || a.stopped_epoch != b.stopped_epoch || !same_bits(&a.metrics, &b.metrics) {
                diffs.push(format!("run with seed {} differs", a.seed));
            }
        }
        match (&self.averaged, &other.averaged) {
            (Some(a), Some(b)) if same_bits(a, b) => {}
            (None, None) => {}
            _ => diffs.push("averaged metrics differ".to_string()),
        }
        for (name, hash) in &self.outputs {
            match other.outputs.get(name) {
                Some(h) if h == hash => {}
                Some(_) => diffs.push(format!("output {name} differs")),
                None => diffs.push(format!("output {name} missing")),
            }
        }
        diffs
    }
}

pub fn metric_bits(m: &Metrics) -> [u64; 5] {
    [
        m.accuracy.to_bits(),
        m.macro_precision.to_bits(),
        m.macro_recall.to_bits(),
        m.macro_f1.to_bits(),
        m.micro_precision.to_bits(),
    ]
}

fn same_bits(a: &Metrics, b: &Metrics) -> bool {
    metric_bits(a) == metric_bits(b)
}
