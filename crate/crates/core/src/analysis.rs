//! Error-analysis reports: term-conditioned confusion matrices, the
//! breakdown of sexist texts predicted non-sexist, raw-length buckets and
//! per-source accuracy.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Source, Task, Task2Label};
use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::preprocess::{normalize, tokenize, PreprocessConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermMatch {
    /// Any listed word appears as a whole token.
    AnyOf(BTreeSet<String>),
    /// Some token starts with the prefix.
    Prefix(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermFilter {
    pub name: String,
    pub matcher: TermMatch,
}

pub const FEMININE_TERMS: [&str; 5] = ["women", "woman", "girl", "lady", "female"];
pub const FEMINIS_PREFIX: &str = "feminis";
/// Censored spellings lose their `*` during normalization, so both forms
/// are listed.
pub const PROFANITIES: [&str; 14] = [
    "bitch", "btch", "whore", "whre", "skank", "sknk", "fuck", "fck", "slut", "slt", "cock",
    "cck", "cunt", "cnt",
];

impl TermFilter {
    pub fn any_of<I, W>(name: impl Into<String>, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = W>,
        W: Into<String>,
    {
        let set: BTreeSet<String> = words.into_iter().map(Into::into).collect();
        if set.is_empty() || set.iter().any(String::is_empty) {
            return Err(Error::Config("term filter needs non-empty words".into()));
        }
        Ok(TermFilter {
            name: name.into(),
            matcher: TermMatch::AnyOf(set),
        })
    }

    pub fn prefix(name: impl Into<String>, prefix: impl Into<String>) -> Result<Self> {
        let prefix = prefix.into();
        if prefix.is_empty() {
            return Err(Error::Config("term filter prefix is empty".into()));
        }
        Ok(TermFilter {
            name: name.into(),
            matcher: TermMatch::Prefix(prefix),
        })
    }

    pub fn feminine() -> Self {
        Self::any_of("feminine-terms", FEMININE_TERMS).expect("non-empty")
    }

    pub fn feminis() -> Self {
        Self::prefix("feminis-prefix", FEMINIS_PREFIX).expect("non-empty")
    }

    pub fn profanities() -> Self {
        Self::any_of("profanities", PROFANITIES).expect("non-empty")
    }

    pub fn builtins() -> Vec<Self> {
        vec![Self::feminine(), Self::feminis(), Self::profanities()]
    }

    /// Parses `name=any:w1,w2` or `name=prefix:p`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad filter `{text}`; want name=any:w1,w2 or name=prefix:p"));
        let (name, rule) = text.split_once('=').ok_or_else(bad)?;
        let (kind, arg) = rule.split_once(':').ok_or_else(bad)?;
        match kind {
            "any" => Self::any_of(name.trim(), arg.split(',').map(str::trim)),
            "prefix" => Self::prefix(name.trim(), arg.trim()),
            _ => Err(bad()),
        }
    }

    pub fn matches_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> bool {
        match &self.matcher {
            TermMatch::AnyOf(words) => tokens.iter().any(|t| words.contains(t.as_ref())),
            TermMatch::Prefix(p) => tokens.iter().any(|t| t.as_ref().starts_with(p.as_str())),
        }
    }

    /// Normalizes `raw` with the default settings, then matches tokens.
    pub fn matches_text(&self, raw: &str) -> bool {
        self.matches_tokens(&tokenize(&normalize(raw, &PreprocessConfig::default())))
    }
}

fn check_aligned(d: &Dataset, preds: &[usize]) -> Result<()> {
    if d.len() != preds.len() {
        return Err(Error::Size(format!(
            "{} predictions for {} examples",
            preds.len(),
            d.len()
        )));
    }
    Ok(())
}

/// Confusion over the examples matched by `filter`, and their count.
pub fn filtered_confusion(
    d: &Dataset,
    preds: &[usize],
    task: Task,
    filter: &TermFilter,
) -> Result<(ConfusionMatrix, usize)> {
    check_aligned(d, preds)?;
    let (truth, picked): (Vec<usize>, Vec<usize>) = d
        .iter()
        .zip(preds)
        .filter(|(e, _)| filter.matches_text(&e.text))
        .map(|(e, &p)| (e.label(task), p))
        .unzip();
    let mut cm = ConfusionMatrix::empty(&task.label_space());
    cm.add_all(&truth, &picked)?;
    Ok((cm, truth.len()))
}

/// Percentage of each true sexist category among sexist examples predicted
/// non-sexist, in label order; categories with no such example are left out.
pub fn misclassification_breakdown(d: &Dataset, preds_task2: &[usize]) -> Result<IndexMap<String, f64>> {
    check_aligned(d, preds_task2)?;
    let mut counts = [0usize; 6];
    for (e, &p) in d.iter().zip(preds_task2) {
        if e.task2.is_sexist() && p == Task2Label::NonSexist.index() {
            counts[e.task2.index()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let mut out = IndexMap::new();
    if total == 0 {
        return Ok(out);
    }
    for (i, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
        let label = Task2Label::from_index(i).expect("index < 6");
        out.insert(label.as_str().to_string(), 100.0 * c as f64 / total as f64);
    }
    Ok(out)
}

/// Raw character-length buckets, inclusive upper bounds.
pub const LENGTH_BUCKETS: [(usize, Option<usize>); 5] = [
    (0, Some(100)),
    (101, Some(250)),
    (251, Some(500)),
    (501, Some(1000)),
    (1001, None),
];

pub fn length_bucket(chars: usize) -> usize {
    LENGTH_BUCKETS
        .iter()
        .position(|&(_, hi)| hi.is_none_or(|h| chars <= h))
        .expect("last bucket is open")
}

pub fn length_bucket_counts(d: &Dataset) -> [usize; 5] {
    let mut counts = [0; 5];
    for e in d {
        counts[length_bucket(e.text.chars().count())] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucketRow {
    pub range: String,
    pub count: usize,
    /// Percent correct; absent for empty buckets or when no predictions
    /// were given.
    pub task1_percent_correct: Option<f64>,
    pub task2_percent_correct: Option<f64>,
}

fn bucket_name(i: usize) -> String {
    match LENGTH_BUCKETS[i] {
        (lo, Some(hi)) => format!("{lo}-{hi}"),
        (lo, None) => format!("{lo}+"),
    }
}

pub fn length_bucket_report(
    d: &Dataset,
    preds_task1: Option<&[usize]>,
    preds_task2: Option<&[usize]>,
) -> Result<Vec<LengthBucketRow>> {
    for p in [preds_task1, preds_task2].into_iter().flatten() {
        check_aligned(d, p)?;
    }
    let buckets: Vec<usize> = d.iter().map(|e| length_bucket(e.text.chars().count())).collect();
    let percent = |task: Task, preds: Option<&[usize]>, bucket: usize| -> Option<f64> {
        let preds = preds?;
        let (mut n, mut hit) = (0usize, 0usize);
        for ((e, &p), &b) in d.iter().zip(preds).zip(&buckets) {
            if b == bucket {
                n += 1;
                hit += usize::from(e.label(task) == p);
            }
        }
        (n > 0).then(|| 100.0 * hit as f64 / n as f64)
    };
    Ok((0..LENGTH_BUCKETS.len())
        .map(|i| LengthBucketRow {
            range: bucket_name(i),
            count: buckets.iter().filter(|&&b| b == i).count(),
            task1_percent_correct: percent(Task::Task1, preds_task1, i),
            task2_percent_correct: percent(Task::Task2, preds_task2, i),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceRow {
    pub count: usize,
    pub accuracy: f64,
}

/// Accuracy per source; sources without examples are omitted.
pub fn source_split_report(d: &Dataset, preds: &[usize], task: Task) -> Result<IndexMap<String, SourceRow>> {
    check_aligned(d, preds)?;
    let mut out = IndexMap::new();
    for source in [Source::Twitter, Source::Gab] {
        let (mut n, mut hit) = (0usize, 0usize);
        for (e, &p) in d.iter().zip(preds) {
            if e.source == source {
                n += 1;
                hit += usize::from(e.label(task) == p);
            }
        }
        if n > 0 {
            out.insert(
                source.as_str().to_string(),
                SourceRow {
                    count: n,
                    accuracy: hit as f64 / n as f64,
                },
            );
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub name: String,
    pub task: Task,
    pub count: usize,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub filters: Vec<FilterReport>,
    pub length_buckets: Vec<LengthBucketRow>,
    pub sources: IndexMap<String, IndexMap<String, SourceRow>>,
    pub misclassified_as_non_sexist: Option<IndexMap<String, f64>>,
}

/// Builds every report available from the given predictions. Term filters
/// use task-1 predictions when present, task-2 otherwise.
pub fn analyze(
    d: &Dataset,
    preds_task1: Option<&[usize]>,
    preds_task2: Option<&[usize]>,
    filters: &[TermFilter],
) -> Result<AnalysisReport> {
    let (filter_task, filter_preds) = match (preds_task1, preds_task2) {
        (Some(p), _) => (Task::Task1, Some(p)),
        (None, Some(p)) => (Task::Task2, Some(p)),
        (None, None) => (Task::Task1, None),
    };
    let filters = match filter_preds {
        Some(preds) => filters
            .par_iter()
            .map(|f| {
                let (confusion, count) = filtered_confusion(d, preds, filter_task, f)?;
                Ok(FilterReport {
                    name: f.name.clone(),
                    task: filter_task,
                    count,
                    confusion,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let mut sources = IndexMap::new();
    for (task, preds) in [(Task::Task1, preds_task1), (Task::Task2, preds_task2)] {
        if let Some(p) = preds {
            sources.insert(format!("task{}", task.number()), source_split_report(d, p, task)?);
        }
    }
    Ok(AnalysisReport {
        filters,
        length_buckets: length_bucket_report(d, preds_task1, preds_task2)?,
        sources,
        misclassified_as_non_sexist: preds_task2
            .map(|p| misclassification_breakdown(d, p))
            .transpose()?,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}%"))
}

impl AnalysisReport {
    /// Aligned plain-text rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for f in &self.filters {
            let _ = writeln!(out, "== {} (task {}): {} texts", f.name, f.task.number(), f.count);
            out.push_str(&f.confusion.ratio_table().render());
        }
        let _ = writeln!(out, "== length buckets (raw characters)");
        let _ = writeln!(out, "{:<10} {:>7} {:>8} {:>8}", "range", "count", "task1", "task2");
        for r in &self.length_buckets {
            let _ = writeln!(
                out,
                "{:<10} {:>7} {:>8} {:>8}",
                r.range,
                r.count,
                pct(r.task1_percent_correct),
                pct(r.task2_percent_correct)
            );
        }
        for (task, rows) in &self.sources {
            let _ = writeln!(out, "== accuracy by source ({task})");
            for (source, row) in rows {
                let _ = writeln!(out, "{source:<10} {:>7} {:>8.3}", row.count, row.accuracy);
            }
        }
        if let Some(b) = &self.misclassified_as_non_sexist {
            let _ = writeln!(out, "== sexist texts predicted non-sexist");
            for (label, p) in b {
                let _ = writeln!(out, "{label:<30} {p:>6.1}%");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Example, Task1Label};

    fn ex(id: usize, source: Source, text: &str, t2: Task2Label) -> Example {
        let t1 = if t2.is_sexist() {
            Task1Label::Sexist
        } else {
            Task1Label::NonSexist
        };
        Example::new(id.to_string(), source, text, t1, t2).unwrap()
    }

    fn data(rows: Vec<Example>) -> Dataset {
        Dataset::new(rows, "test").unwrap()
    }

    #[test]
    fn filters_match_whole_tokens_and_prefixes() {
        let f = TermFilter::feminine();
        assert!(f.matches_text("That WOMAN, again!"));
        assert!(!f.matches_text("womanhood"));
        let p = TermFilter::feminis();
        assert!(p.matches_text("#Feminism is fine"));
        assert!(p.matches_text("feminists"));
        assert!(!p.matches_text("femin"));
        let prof = TermFilter::profanities();
        assert!(prof.matches_text("what a b*tch"));
        assert!(prof.matches_text("BITCH"));
        assert!(TermFilter::any_of("x", Vec::<String>::new()).is_err());
        assert_eq!(TermFilter::parse("f=prefix:fem").unwrap(), TermFilter::prefix("f", "fem").unwrap());
        assert!(TermFilter::parse("nonsense").is_err());
    }

    #[test]
    fn filter_matching_nothing_is_empty() {
        let d = data(vec![ex(1, Source::Twitter, "hello", Task2Label::NonSexist)]);
        let f = TermFilter::any_of("none", ["zzz"]).unwrap();
        let (cm, n) = filtered_confusion(&d, &[0], Task::Task1, &f).unwrap();
        assert_eq!(n, 0);
        assert_eq!(cm.total(), 0);
    }

    #[test]
    fn breakdown_three_to_one() {
        let rows = vec![
            ex(1, Source::Twitter, "a", Task2Label::Objectification),
            ex(2, Source::Twitter, "b", Task2Label::Objectification),
            ex(3, Source::Twitter, "c", Task2Label::Objectification),
            ex(4, Source::Twitter, "d", Task2Label::SexualViolence),
            ex(5, Source::Twitter, "e", Task2Label::SexualViolence),
        ];
        let d = data(rows);
        let b = misclassification_breakdown(&d, &[0, 0, 0, 0, 3]).unwrap();
        assert_eq!(b["objectification"], 75.0);
        assert_eq!(b["sexual-violence"], 25.0);
        assert!(misclassification_breakdown(&d, &[2, 2, 2, 3, 3]).unwrap().is_empty());
    }

    #[test]
    fn length_boundaries() {
        assert_eq!(length_bucket(0), 0);
        assert_eq!(length_bucket(100), 0);
        assert_eq!(length_bucket(101), 1);
        assert_eq!(length_bucket(250), 1);
        assert_eq!(length_bucket(1000), 3);
        assert_eq!(length_bucket(1001), 4);
        let fifty = "x".repeat(50);
        let d = data(vec![
            ex(1, Source::Gab, &fifty, Task2Label::NonSexist),
            ex(2, Source::Gab, &fifty, Task2Label::Objectification),
        ]);
        let rows = length_bucket_report(&d, Some(&[0, 1]), None).unwrap();
        assert_eq!(rows[0].count, 2);
        assert_eq!(rows[0].task1_percent_correct, Some(100.0));
        assert_eq!(rows[1].count, 0);
        assert_eq!(rows[1].task1_percent_correct, None);
        assert_eq!(rows[0].task2_percent_correct, None);
    }

    #[test]
    fn source_split_example() {
        let d = data(vec![
            ex(1, Source::Twitter, "a", Task2Label::NonSexist),
            ex(2, Source::Twitter, "b", Task2Label::NonSexist),
            ex(3, Source::Gab, "c", Task2Label::NonSexist),
            ex(4, Source::Gab, "d", Task2Label::NonSexist),
        ]);
        let r = source_split_report(&d, &[0, 1, 0, 0], Task::Task1).unwrap();
        assert_eq!(r["twitter"].accuracy, 0.5);
        assert_eq!(r["gab"].accuracy, 1.0);
        let tw = data(vec![ex(1, Source::Twitter, "a", Task2Label::NonSexist)]);
        assert_eq!(source_split_report(&tw, &[0], Task::Task1).unwrap().len(), 1);
    }

    #[test]
    fn full_report_renders() {
        let d = data(vec![
            ex(1, Source::Twitter, "women drive", Task2Label::StereotypingDominance),
            ex(2, Source::Gab, "nice day", Task2Label::NonSexist),
        ]);
        let r = analyze(&d, Some(&[0, 0]), Some(&[0, 0]), &TermFilter::builtins()).unwrap();
        assert_eq!(r.filters[0].count, 1);
        let text = r.render_text();
        assert!(text.contains("feminine-terms"));
        assert!(text.contains("stereotyping-dominance"));
        let json = serde_json::to_string(&r).unwrap();
        let back: AnalysisReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
