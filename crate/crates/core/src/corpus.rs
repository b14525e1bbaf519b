//! EXIST-style labeled datasets.
//!
//! Input files are UTF-8 TSV with (at least) the columns
//! `id  source  language  text  task1  task2`. Columns are located by header
//! name, so extra columns such as `test_case` are ignored. Only rows whose
//! `language` is `en` are kept.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header written by [`Dataset::to_tsv`].
pub const TSV_HEADER: &str = "id\tsource\tlanguage\ttext\ttask1\ttask2";

const REQUIRED_COLUMNS: [&str; 6] = ["id", "source", "language", "text", "task1", "task2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Twitter,
    Gab,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Twitter => "twitter",
            Source::Gab => "gab",
        }
    }
}

impl FromStr for Source {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "twitter" => Ok(Source::Twitter),
            "gab" => Ok(Source::Gab),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary sexism label. Discriminants are label-space indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task1Label {
    NonSexist = 0,
    Sexist = 1,
}

/// Fine-grained category. Discriminants are label-space indices; index 0 is
/// always `non-sexist`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task2Label {
    NonSexist = 0,
    IdeologicalInequality = 1,
    Objectification = 2,
    SexualViolence = 3,
    StereotypingDominance = 4,
    MisogynyNonSexualViolence = 5,
}

pub const TASK1_LABELS: [&str; 2] = ["non-sexist", "sexist"];
pub const TASK2_LABELS: [&str; 6] = [
    "non-sexist",
    "ideological-inequality",
    "objectification",
    "sexual-violence",
    "stereotyping-dominance",
    "misogyny-non-sexual-violence",
];

impl Task1Label {
    pub const ALL: [Task1Label; 2] = [Task1Label::NonSexist, Task1Label::Sexist];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        TASK1_LABELS[self.index()]
    }

    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.trim().to_lowercase();
        Self::ALL.into_iter().find(|l| l.as_str() == lower)
    }
}

impl Task2Label {
    pub const ALL: [Task2Label; 6] = [
        Task2Label::NonSexist,
        Task2Label::IdeologicalInequality,
        Task2Label::Objectification,
        Task2Label::SexualViolence,
        Task2Label::StereotypingDominance,
        Task2Label::MisogynyNonSexualViolence,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        TASK2_LABELS[self.index()]
    }

    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.trim().to_lowercase();
        Self::ALL.into_iter().find(|l| l.as_str() == lower)
    }

    pub fn is_sexist(self) -> bool {
        self != Task2Label::NonSexist
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "1")]
    Task1,
    #[serde(rename = "2")]
    Task2,
}

impl Task {
    pub fn num_classes(self) -> usize {
        self.label_space().len()
    }

    pub fn label_space(self) -> LabelSpace {
        LabelSpace::for_task(self)
    }

    pub fn number(self) -> u8 {
        match self {
            Task::Task1 => 1,
            Task::Task2 => 2,
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "task1" => Ok(Task::Task1),
            "2" | "task2" => Ok(Task::Task2),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Ordered label names of one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    pub task: Task,
    pub labels: &'static [&'static str],
}

impl LabelSpace {
    pub fn for_task(task: Task) -> Self {
        let labels: &'static [&'static str] = match task {
            Task::Task1 => &TASK1_LABELS,
            Task::Task2 => &TASK2_LABELS,
        };
        LabelSpace { task, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn name(&self, index: usize) -> &'static str {
        self.labels[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        let lower = name.trim().to_lowercase();
        self.labels.iter().position(|l| *l == lower)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub source: Source,
    pub text: String,
    pub task1: Task1Label,
    pub task2: Task2Label,
}

impl Example {
    /// Builds an example, checking that both labels agree on sexist vs non-sexist.
    pub fn new(
        id: impl Into<String>,
        source: Source,
        text: impl Into<String>,
        task1: Task1Label,
        task2: Task2Label,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::format(&id, "empty id"));
        }
        if (task1 == Task1Label::NonSexist) != (task2 == Task2Label::NonSexist) {
            return Err(Error::Label {
                location: format!("example `{id}`"),
                label: format!("{} / {}", task1.as_str(), task2.as_str()),
            });
        }
        Ok(Example {
            id,
            source,
            text: text.into(),
            task1,
            task2,
        })
    }

    /// Label index of this example in the task's [`LabelSpace`].
    pub fn label(&self, task: Task) -> usize {
        match task {
            Task::Task1 => self.task1.index(),
            Task::Task2 => self.task2.index(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub provenance: String,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate ids.
    pub fn new(examples: Vec<Example>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::Duplicate(ex.id.clone()));
            }
        }
        Ok(Dataset {
            examples,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    pub fn labels(&self, task: Task) -> Vec<usize> {
        self.examples.iter().map(|e| e.label(task)).collect()
    }

    /// Parses TSV content. `provenance` is used in error messages.
    pub fn parse_tsv(content: &str, provenance: &str) -> Result<Self> {
        let mut lines = content.split('\n').enumerate();
        let header = loop {
            match lines.next() {
                Some((_, line)) if line.trim_end_matches('\r').is_empty() => continue,
                Some((_, line)) => break line.trim_end_matches('\r'),
                None => return Err(Error::format(provenance, "missing header")),
            }
        };
        let names: Vec<String> = header
            .split('\t')
            .map(|c| c.trim().to_ascii_lowercase())
            .collect();
        let mut cols = [0usize; 6];
        for (slot, required) in cols.iter_mut().zip(REQUIRED_COLUMNS) {
            *slot = names.iter().position(|n| n == required).ok_or_else(|| {
                Error::format(
                    format!("{provenance}:1"),
                    format!("header lacks column `{required}`"),
                )
            })?;
        }
        let [c_id, c_source, c_lang, c_text, c_t1, c_t2] = cols;

        let mut examples = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, raw) in lines {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() {
                continue;
            }
            let location = format!("{provenance}:{}", lineno + 1);
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != names.len() {
                return Err(Error::format(
                    &location,
                    format!(
                        "row has {} columns, header has {}",
                        fields.len(),
                        names.len()
                    ),
                ));
            }
            if !fields[c_lang].trim().eq_ignore_ascii_case("en") {
                continue;
            }
            let id = fields[c_id].trim();
            if id.is_empty() {
                return Err(Error::format(&location, "empty id"));
            }
            let source = fields[c_source].parse::<Source>().map_err(|_| {
                Error::format(&location, format!("unknown source `{}`", fields[c_source]))
            })?;
            let task1 = Task1Label::parse(fields[c_t1]).ok_or_else(|| Error::Label {
                location: location.clone(),
                label: fields[c_t1].to_string(),
            })?;
            let task2 = Task2Label::parse(fields[c_t2]).ok_or_else(|| Error::Label {
                location: location.clone(),
                label: fields[c_t2].to_string(),
            })?;
            if !seen.insert(id.to_string()) {
                return Err(Error::Duplicate(id.to_string()));
            }
            let example = Example::new(id, source, fields[c_text], task1, task2).map_err(|e| {
                match e {
                    Error::Label { label, .. } => Error::Label {
                        location: location.clone(),
                        label,
                    },
                    other => other,
                }
            })?;
            examples.push(example);
        }
        Ok(Dataset {
            examples,
            provenance: provenance.to_string(),
        })
    }

    /// Canonical TSV rendering (header plus one row per example, LF endings).
    pub fn to_tsv(&self) -> Result<String> {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(TSV_HEADER);
        out.push('\n');
        for ex in &self.examples {
            if ex.text.contains(['\t', '\n']) || ex.id.contains(['\t', '\n']) {
                return Err(Error::format(
                    format!("example `{}`", ex.id),
                    "tab or newline inside a field cannot be written as TSV",
                ));
            }
            out.push_str(&ex.id);
            out.push('\t');
            out.push_str(ex.source.as_str());
            out.push_str("\ten\t");
            out.push_str(&ex.text);
            out.push('\t');
            out.push_str(ex.task1.as_str());
            out.push('\t');
            out.push_str(ex.task2.as_str());
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv()?)?;
        Ok(())
    }

    /// Fraction of examples per label, in label-space order.
    pub fn class_distribution(&self, task: Task) -> Result<IndexMap<&'static str, f64>> {
        class_distribution(self, task)
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Example;
    type IntoIter = std::slice::Iter<'a, Example>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let content = fs::read_to_string(path)?;
    Dataset::parse_tsv(&content, &path.display().to_string())
}

/// Splits off the first ⌊0.8·N⌋ examples for training, keeping file order.
pub fn split_train_val(d: &Dataset) -> Result<(Dataset, Dataset)> {
    let n = d.len();
    if n < 2 {
        return Err(Error::Size(format!(
            "need at least 2 examples to split, got {n}"
        )));
    }
    let cut = n * 4 / 5;
    let train = Dataset {
        examples: d.examples[..cut].to_vec(),
        provenance: format!("{}[train]", d.provenance),
    };
    let val = Dataset {
        examples: d.examples[cut..].to_vec(),
        provenance: format!("{}[val]", d.provenance),
    };
    Ok((train, val))
}

pub fn class_distribution(d: &Dataset, task: Task) -> Result<IndexMap<&'static str, f64>> {
    if d.is_empty() {
        return Err(Error::Size("class distribution of an empty dataset".into()));
    }
    let space = task.label_space();
    let mut counts = vec![0usize; space.len()];
    for ex in d {
        counts[ex.label(task)] += 1;
    }
    let total = d.len() as f64;
    Ok(space
        .labels
        .iter()
        .zip(counts)
        .map(|(name, c)| (*name, c as f64 / total))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, t1: &str, t2: &str) -> String {
        format!("{id}\ttwitter\ten\tsome text\t{t1}\t{t2}\n")
    }

    #[test]
    fn parses_single_row() {
        let tsv = format!(
            "{TSV_HEADER}\n001\ttwitter\ten\thello\tnon-sexist\tnon-sexist\n"
        );
        let d = Dataset::parse_tsv(&tsv, "mem").unwrap();
        assert_eq!(d.len(), 1);
        let ex = &d.examples[0];
        assert_eq!(ex.id, "001");
        assert_eq!(ex.source, Source::Twitter);
        assert_eq!(ex.text, "hello");
        assert_eq!(ex.task1, Task1Label::NonSexist);
        assert_eq!(ex.task2, Task2Label::NonSexist);
    }

    #[test]
    fn header_only_is_empty() {
        let d = Dataset::parse_tsv(&format!("{TSV_HEADER}\n"), "mem").unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn skips_non_english_and_extra_columns() {
        let tsv = "test_case\tid\tsource\tlanguage\ttext\ttask1\ttask2\r\n\
                   EXIST2021\t1\tgab\ten\tHi\tSEXIST\tObjectification\r\n\
                   EXIST2021\t2\ttwitter\tes\tHola\tnon-sexist\tnon-sexist\r\n";
        let d = Dataset::parse_tsv(tsv, "mem").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.examples[0].source, Source::Gab);
        assert_eq!(d.examples[0].task1, Task1Label::Sexist);
        assert_eq!(d.examples[0].task2, Task2Label::Objectification);
        assert_eq!(d.examples[0].text, "Hi");
    }

    #[test]
    fn missing_column_names_row() {
        let tsv = format!("{TSV_HEADER}\n1\ttwitter\ten\thello\tsexist\n");
        match Dataset::parse_tsv(&tsv, "f.tsv") {
            Err(Error::Format { location, .. }) => assert_eq!(location, "f.tsv:2"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_label_error() {
        let tsv = format!("{TSV_HEADER}\n{}", row("1", "sexist", "rude"));
        assert!(matches!(
            Dataset::parse_tsv(&tsv, "f"),
            Err(Error::Label { .. })
        ));
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let tsv = format!(
            "{TSV_HEADER}\n{}{}",
            row("1", "sexist", "objectification"),
            row("1", "non-sexist", "non-sexist")
        );
        assert!(matches!(
            Dataset::parse_tsv(&tsv, "f"),
            Err(Error::Duplicate(id)) if id == "1"
        ));
    }

    #[test]
    fn inconsistent_tasks_are_rejected() {
        let tsv = format!("{TSV_HEADER}\n{}", row("1", "sexist", "non-sexist"));
        assert!(matches!(
            Dataset::parse_tsv(&tsv, "f"),
            Err(Error::Label { .. })
        ));
    }

    fn synthetic(n: usize) -> Dataset {
        let examples = (0..n)
            .map(|i| {
                Example::new(
                    i.to_string(),
                    Source::Twitter,
                    "t",
                    Task1Label::NonSexist,
                    Task2Label::NonSexist,
                )
                .unwrap()
            })
            .collect();
        Dataset::new(examples, "syn").unwrap()
    }

    #[test]
    fn split_sizes() {
        for (n, expect) in [(10, (8, 2)), (3436, (2748, 688)), (5, (4, 1)), (2, (1, 1))] {
            let d = synthetic(n);
            let (tr, va) = split_train_val(&d).unwrap();
            assert_eq!((tr.len(), va.len()), expect);
            assert_eq!(tr.examples[0].id, "0");
            assert_eq!(va.examples[0].id, expect.0.to_string());
        }
        assert!(matches!(split_train_val(&synthetic(1)), Err(Error::Size(_))));
    }

    #[test]
    fn distribution_of_single_sexist() {
        let ex = Example::new(
            "a",
            Source::Gab,
            "x",
            Task1Label::Sexist,
            Task2Label::SexualViolence,
        )
        .unwrap();
        let d = Dataset::new(vec![ex], "m").unwrap();
        let dist = class_distribution(&d, Task::Task1).unwrap();
        assert_eq!(dist["sexist"], 1.0);
        assert_eq!(dist["non-sexist"], 0.0);
        let dist2 = class_distribution(&d, Task::Task2).unwrap();
        assert_eq!(dist2.len(), 6);
        assert_eq!(dist2["sexual-violence"], 1.0);
        assert!(matches!(
            class_distribution(&synthetic(0), Task::Task1),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn label_space_order() {
        let s = LabelSpace::for_task(Task::Task2);
        assert_eq!(s.name(0), "non-sexist");
        assert_eq!(s.index_of("Misogyny-Non-Sexual-Violence"), Some(5));
        assert_eq!(LabelSpace::for_task(Task::Task1).labels, &["non-sexist", "sexist"]);
    }
}
