//! Confusion matrices, macro-averaged metrics, run averaging and the
//! majority-class baseline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, LabelSpace, Task};
use crate::error::{Error, Result};

/// `K×K` counts; rows are true labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(truth: &[usize], preds: &[usize], space: &LabelSpace) -> Result<Self> {
        if truth.len() != preds.len() {
            return Err(Error::Size(format!(
                "{} true labels but {} predictions",
                truth.len(),
                preds.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::Size("confusion matrix of nothing".into()));
        }
        let mut cm = Self::empty(space);
        cm.add_all(truth, preds)?;
        Ok(cm)
    }

    /// All-zero matrix over a label space.
    pub fn empty(space: &LabelSpace) -> Self {
        let k = space.len();
        ConfusionMatrix {
            labels: space.labels.iter().map(|s| s.to_string()).collect(),
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = labels.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Shape(format!("confusion counts are not {k}×{k}")));
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub(crate) fn add_all(&mut self, truth: &[usize], preds: &[usize]) -> Result<()> {
        let k = self.k();
        for (&t, &p) in truth.iter().zip(preds) {
            if t >= k || p >= k {
                return Err(Error::Size(format!("label index outside {k} classes")));
            }
            self.counts[t][p] += 1;
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    /// Row-normalized view; rows without support are all zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn ratio_table(&self) -> RatioTable {
        RatioTable {
            labels: self.labels.clone(),
            rows: self.normalized(),
        }
    }

    /// Aligned text rendering of the counts.
    pub fn render_counts(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .counts
            .iter()
            .map(|r| r.iter().map(u64::to_string).collect())
            .collect();
        render_grid(&self.labels, &cells)
    }
}

fn render_grid(labels: &[String], cells: &[Vec<String>]) -> String {
    let head = labels.iter().map(String::len).max().unwrap_or(0).max(4);
    let width = labels
        .iter()
        .map(String::len)
        .chain(cells.iter().flatten().map(String::len))
        .max()
        .unwrap_or(1);
    let mut out = String::new();
    let _ = write!(out, "{:head$}", "true\\pred");
    for l in labels {
        let _ = write!(out, "  {l:>width$}");
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(cells) {
        let _ = write!(out, "{l:head$}");
        for c in row {
            let _ = write!(out, "  {c:>width$}");
        }
        out.push('\n');
    }
    out
}

/// Row-normalized confusion ratios with a two-decimal text form
/// (`label<TAB>r1<TAB>r2...` per row) that parses back exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RatioTable {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (label, row) in self.labels.iter().zip(&self.rows) {
            out.push_str(label);
            for v in row {
                let _ = write!(out, "\t{v:.2}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut parts = line.split('\t');
            let label = parts.next().unwrap_or_default().trim().to_string();
            let row = parts
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::format(format!("ratio row {}", i + 1), format!("bad number `{p}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            labels.push(label);
            rows.push(row);
        }
        let k = labels.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::format("ratio table", format!("rows are not {k} wide")));
        }
        Ok(RatioTable { labels, rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Accuracy plus macro-averaged precision/recall/F1. `micro_precision` is
/// pooled over classes (equal to accuracy for single-label predictions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
}

/// Per-class scores with the zero-denominator convention (0 when undefined).
pub fn per_class(cm: &ConfusionMatrix) -> Vec<ClassScores> {
    let k = cm.k();
    (0..k)
        .map(|c| {
            let tp = cm.counts[c][c] as f64;
            let predicted: u64 = (0..k).map(|r| cm.counts[r][c]).sum();
            let support: u64 = cm.counts[c].iter().sum();
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = if support == 0 { 0.0 } else { tp / support as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScores {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect()
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let total = cm.total();
    let scores = per_class(cm);
    let k = scores.len().max(1) as f64;
    let accuracy = if total == 0 { 0.0 } else { cm.trace() as f64 / total as f64 };
    Metrics {
        accuracy,
        macro_precision: scores.iter().map(|s| s.precision).sum::<f64>() / k,
        macro_recall: scores.iter().map(|s| s.recall).sum::<f64>() / k,
        macro_f1: scores.iter().map(|s| s.f1).sum::<f64>() / k,
        micro_precision: accuracy,
    }
}

/// Arithmetic mean of every field.
pub fn average_runs(runs: &[Metrics]) -> Result<Metrics> {
    if runs.is_empty() {
        return Err(Error::Size("no runs to average".into()));
    }
    let n = runs.len() as f64;
    let mean = |f: fn(&Metrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
    Ok(Metrics {
        accuracy: mean(|m| m.accuracy),
        macro_precision: mean(|m| m.macro_precision),
        macro_recall: mean(|m| m.macro_recall),
        macro_f1: mean(|m| m.macro_f1),
        micro_precision: mean(|m| m.micro_precision),
    })
}

/// Most frequent label of a dataset (ties go to the lowest index).
pub fn modal_label(d: &Dataset, task: Task) -> Result<usize> {
    if d.is_empty() {
        return Err(Error::Size("mode of an empty dataset".into()));
    }
    let mut counts = vec![0usize; task.num_classes()];
    for ex in d {
        counts[ex.label(task)] += 1;
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    Ok(counts.iter().position(|&c| c == best).unwrap_or(0))
}

/// Predicts one label for every example of `eval_set`: the modal label of
/// `mode_from`, or of `eval_set` itself when `None`.
pub fn majority_baseline(
    eval_set: &Dataset,
    task: Task,
    mode_from: Option<&Dataset>,
) -> Result<(Metrics, ConfusionMatrix)> {
    let label = modal_label(mode_from.unwrap_or(eval_set), task)?;
    let truth = eval_set.labels(task);
    let preds = vec![label; truth.len()];
    let cm = ConfusionMatrix::new(&truth, &preds, &task.label_space())?;
    Ok((metrics(&cm), cm))
}

/// JSON report for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub labels: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    pub fn new(m: &Metrics, cm: &ConfusionMatrix) -> Self {
        MetricsReport {
            accuracy: m.accuracy,
            macro_precision: m.macro_precision,
            macro_recall: m.macro_recall,
            macro_f1: m.macro_f1,
            micro_precision: m.micro_precision,
            labels: cm.labels.clone(),
            confusion: cm.counts.clone(),
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            accuracy: self.accuracy,
            macro_precision: self.macro_precision,
            macro_recall: self.macro_recall,
            macro_f1: self.macro_f1,
            micro_precision: self.micro_precision,
        }
    }
}
