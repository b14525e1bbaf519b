#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use exist_core::corpus::{Dataset, Example, Source, Task1Label, Task2Label};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn exist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exist"))
        .args(args)
        .output()
        .expect("spawn exist")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Test-set shape of the shared task: 2208 texts (1716 tweets, 492 gabs),
/// 1050 non-sexist, the sexist rest split across categories in proportion
/// 15 : 7 : 9 : 12 : 10.
pub fn majority_corpus() -> Dataset {
    let counts = [
        (Task2Label::NonSexist, 1050),
        (Task2Label::IdeologicalInequality, 328),
        (Task2Label::Objectification, 153),
        (Task2Label::SexualViolence, 197),
        (Task2Label::StereotypingDominance, 262),
        (Task2Label::MisogynyNonSexualViolence, 218),
    ];
    let mut examples = Vec::new();
    for (t2, n) in counts {
        let t1 = if t2.is_sexist() {
            Task1Label::Sexist
        } else {
            Task1Label::NonSexist
        };
        for _ in 0..n {
            let i = examples.len();
            let source = if i < 1716 { Source::Twitter } else { Source::Gab };
            examples.push(Example::new(format!("t{i}"), source, format!("text number {i}"), t1, t2).unwrap());
        }
    }
    Dataset::new(examples, "majority").unwrap()
}

const FILLER: [&str; 12] = [
    "the", "a", "today", "people", "really", "think", "about", "this", "what", "so", "very", "on",
];
const CATEGORY_MARKERS: [[&str; 2]; 6] = [
    ["weather", "coffee"],
    ["equality", "quota"],
    ["skirt", "body"],
    ["grab", "force"],
    ["kitchen", "cook"],
    ["hate", "stupid"],
];

/// Raw tweet-like texts whose two marker words identify the task 2 class.
pub fn marker_corpus(n: usize, seed: u64, prefix: &str) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let k = if i % 2 == 0 { 0 } else { 1 + (i / 2) % 5 };
            let t2 = Task2Label::from_index(k).unwrap();
            let t1 = if t2.is_sexist() {
                Task1Label::Sexist
            } else {
                Task1Label::NonSexist
            };
            let mut words: Vec<String> = (0..7).map(|_| FILLER.choose(&mut rng).unwrap().to_string()).collect();
            words.insert(1, CATEGORY_MARKERS[k].choose(&mut rng).unwrap().to_string());
            words.insert(5, format!("#{}", CATEGORY_MARKERS[k].choose(&mut rng).unwrap()));
            if i % 3 == 0 {
                words.insert(0, "@user".into());
            }
            if i % 7 == 0 {
                words.push("https://t.co/x1".into());
            }
            let source = if i % 4 == 3 { Source::Gab } else { Source::Twitter };
            Example::new(format!("{prefix}{i}"), source, words.join(" ") + "!", t1, t2).unwrap()
        })
        .collect();
    Dataset::new(examples, "markers").unwrap()
}

pub fn write(d: &Dataset, path: &Path) {
    d.write_tsv(path).unwrap();
}

/// Small architecture flags that train in well under a second per run.
pub const SMALL_MODEL: [&str; 16] = [
    "--model", "cnn", "--embedding-dim", "16", "--conv-channels", "8", "--hidden", "8",
    "--max-len", "24", "--epochs", "8", "--patience", "4", "--lr", "0.003",
];
