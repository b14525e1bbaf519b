//! Easy Data Augmentation: synonym replacement, random insertion and random
//! swap. Random deletion is deliberately not offered.
//!
//! Every per-sentence operation touches `n = max(1, ⌊rate·L⌋)` words, `L`
//! being the token count of the original sentence. Within one variant the
//! enabled operations run in the fixed order SR → RI → RS.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::corpus::{Dataset, Example};
use crate::error::{Error, Result};
use crate::preprocess::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdaOp {
    SynonymReplacement,
    RandomInsertion,
    RandomSwap,
}

impl EdaOp {
    pub const ALL: [EdaOp; 3] = [
        EdaOp::SynonymReplacement,
        EdaOp::RandomInsertion,
        EdaOp::RandomSwap,
    ];

    pub fn code(self) -> &'static str {
        match self {
            EdaOp::SynonymReplacement => "sr",
            EdaOp::RandomInsertion => "ri",
            EdaOp::RandomSwap => "rs",
        }
    }
}

impl FromStr for EdaOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sr" => Ok(EdaOp::SynonymReplacement),
            "ri" => Ok(EdaOp::RandomInsertion),
            "rs" => Ok(EdaOp::RandomSwap),
            "rd" => Err(Error::Config("random deletion is not supported".into())),
            other => Err(Error::Config(format!("unknown augmentation op `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdaConfig {
    rate: f64,
    pub n_aug: usize,
    ops: Vec<EdaOp>,
    pub seed: u64,
}

impl Default for EdaConfig {
    fn default() -> Self {
        EdaConfig {
            rate: 0.05,
            n_aug: 8,
            ops: EdaOp::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl EdaConfig {
    pub fn new(
        rate: f64,
        n_aug: usize,
        ops: impl IntoIterator<Item = EdaOp>,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!("rate {rate} outside [0, 1]")));
        }
        let mut ops: Vec<EdaOp> = ops.into_iter().collect();
        ops.sort();
        ops.dedup();
        Ok(EdaConfig {
            rate,
            n_aug,
            ops,
            seed,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn ops(&self) -> &[EdaOp] {
        &self.ops
    }

    /// Number of words one operation touches in a sentence of `len` tokens.
    pub fn words_per_op(&self, len: usize) -> usize {
        ((self.rate * len as f64).floor() as usize).max(1)
    }
}

/// Synonym source: word → synonyms (never containing the word itself).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: IndexMap<String, Vec<String>>,
}

impl Lexicon {
    /// Adds an entry. Self-references and duplicates are dropped; an entry left
    /// without synonyms is not stored.
    pub fn insert(&mut self, word: impl Into<String>, synonyms: impl IntoIterator<Item = String>) {
        let word = word.into();
        let mut list: Vec<String> = Vec::new();
        for s in synonyms {
            if s != word && !list.contains(&s) {
                list.push(s);
            }
        }
        if !list.is_empty() {
            self.entries.insert(word, list);
        }
    }

    pub fn synonyms(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `word<TAB>syn1,syn2,...` lines. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn parse(content: &str, provenance: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (i, raw) in content.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let location = format!("{provenance}:{}", i + 1);
            let (word, syns) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(&location, "expected `word<TAB>synonyms`"))?;
            let word = word.trim();
            if word.is_empty() || word.contains(char::is_whitespace) {
                return Err(Error::format(&location, format!("bad headword `{word}`")));
            }
            let mut list = Vec::new();
            for s in syns.split(',') {
                let s = s.trim();
                if s.is_empty() {
                    continue;
                }
                if s.contains(char::is_whitespace) {
                    return Err(Error::format(
                        &location,
                        format!("synonym `{s}` is not a single token"),
                    ));
                }
                list.push(s.to_string());
            }
            lex.insert(word, list);
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }

    fn has_entry(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }
}

impl<W: Into<String>, I: IntoIterator<Item = S>, S: Into<String>> FromIterator<(W, I)> for Lexicon {
    fn from_iter<T: IntoIterator<Item = (W, I)>>(iter: T) -> Self {
        let mut lex = Lexicon::default();
        for (w, syns) in iter {
            lex.insert(w, syns.into_iter().map(Into::into));
        }
        lex
    }
}

pub fn synonym_replacement<R: Rng + ?Sized>(
    tokens: &[String],
    n: usize,
    lexicon: &Lexicon,
    rng: &mut R,
) -> Vec<String> {
    let mut out = tokens.to_vec();
    if n == 0 {
        return out;
    }
    let mut candidates: Vec<usize> = (0..out.len())
        .filter(|&i| lexicon.has_entry(&out[i]))
        .collect();
    candidates.shuffle(rng);
    for &i in candidates.iter().take(n) {
        let syns = lexicon.synonyms(&out[i]).expect("candidate has entry");
        out[i] = syns.choose(rng).expect("non-empty synonyms").clone();
    }
    out
}

pub fn random_insertion<R: Rng + ?Sized>(
    tokens: &[String],
    n: usize,
    lexicon: &Lexicon,
    rng: &mut R,
) -> Vec<String> {
    let mut out = tokens.to_vec();
    for _ in 0..n {
        let candidates: Vec<usize> = (0..out.len())
            .filter(|&i| lexicon.has_entry(&out[i]))
            .collect();
        let Some(&pick) = candidates.choose(rng) else {
            break;
        };
        let syns = lexicon.synonyms(&out[pick]).expect("candidate has entry");
        let word = syns.choose(rng).expect("non-empty synonyms").clone();
        let pos = rng.random_range(0..=out.len());
        out.insert(pos, word);
    }
    out
}

pub fn random_swap<R: Rng + ?Sized>(tokens: &[String], n: usize, rng: &mut R) -> Vec<String> {
    let mut out = tokens.to_vec();
    let len = out.len();
    if len < 2 {
        return out;
    }
    for _ in 0..n {
        let i = rng.random_range(0..len);
        // Uniform over the len-1 positions other than i.
        let mut j = rng.random_range(0..len - 1);
        if j >= i {
            j += 1;
        }
        out.swap(i, j);
    }
    out
}

/// RNG for one example, derived from the run seed and the example id so
/// results do not depend on processing order.
pub fn example_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Produces `cfg.n_aug` variants of one tokenized sentence.
pub fn augment_tokens<R: Rng + ?Sized>(
    tokens: &[String],
    cfg: &EdaConfig,
    lexicon: &Lexicon,
    rng: &mut R,
) -> Vec<Vec<String>> {
    let n = cfg.words_per_op(tokens.len());
    (0..cfg.n_aug)
        .map(|_| {
            let mut variant = tokens.to_vec();
            for op in &cfg.ops {
                variant = match op {
                    EdaOp::SynonymReplacement => synonym_replacement(&variant, n, lexicon, rng),
                    EdaOp::RandomInsertion => random_insertion(&variant, n, lexicon, rng),
                    EdaOp::RandomSwap => random_swap(&variant, n, rng),
                };
            }
            variant
        })
        .collect()
}

/// Each original example followed by its `n_aug` variants (`id#1`, `id#2`, ...),
/// which inherit source and labels. Texts must already be normalized.
pub fn augment_dataset(d: &Dataset, cfg: &EdaConfig, lex: &Lexicon) -> Dataset {
    let groups: Vec<Vec<Example>> = d
        .examples
        .par_iter()
        .map(|ex| {
            let mut rng = example_rng(cfg.seed, &ex.id);
            let tokens = tokenize(&ex.text);
            let mut group = Vec::with_capacity(cfg.n_aug + 1);
            group.push(ex.clone());
            for (k, variant) in augment_tokens(&tokens, cfg, lex, &mut rng)
                .into_iter()
                .enumerate()
            {
                group.push(Example {
                    id: format!("{}#{}", ex.id, k + 1),
                    source: ex.source,
                    text: variant.join(" "),
                    task1: ex.task1,
                    task2: ex.task2,
                });
            }
            group
        })
        .collect();
    Dataset {
        examples: groups.into_iter().flatten().collect(),
        provenance: format!("{}[eda]", d.provenance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn lex(pairs: &[(&str, &[&str])]) -> Lexicon {
        pairs
            .iter()
            .map(|(w, s)| (*w, s.iter().map(|x| x.to_string()).collect::<Vec<_>>()))
            .collect()
    }

    #[test]
    fn sr_forced_outcome() {
        let l = lex(&[("happy", &["glad"])]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            synonym_replacement(&toks("happy day"), 1, &l, &mut rng),
            toks("glad day")
        );
        assert_eq!(
            synonym_replacement(&toks("happy day"), 0, &l, &mut rng),
            toks("happy day")
        );
        assert_eq!(
            synonym_replacement(&toks("happy day"), 1, &Lexicon::default(), &mut rng),
            toks("happy day")
        );
    }

    #[test]
    fn ri_cases() {
        let l = lex(&[("happy", &["glad"])]);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = random_insertion(&toks("happy"), 1, &l, &mut rng);
            assert_eq!(out.len(), 2);
            assert!(out.contains(&"happy".to_string()));
            assert!(out.contains(&"glad".to_string()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(random_insertion(&[], 3, &l, &mut rng).is_empty());
        assert_eq!(
            random_insertion(&toks("a b"), 2, &Lexicon::default(), &mut rng),
            toks("a b")
        );
    }

    #[test]
    fn rs_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(random_swap(&toks("a"), 1, &mut rng), toks("a"));
        assert_eq!(random_swap(&toks("a b"), 1, &mut rng), toks("b a"));
        assert_eq!(random_swap(&toks("a b c"), 0, &mut rng), toks("a b c"));
    }

    #[test]
    fn words_per_op_floor_with_minimum() {
        let cfg = EdaConfig::default();
        assert_eq!(cfg.words_per_op(0), 1);
        assert_eq!(cfg.words_per_op(19), 1);
        assert_eq!(cfg.words_per_op(40), 2);
        let zero = EdaConfig::new(0.0, 1, EdaOp::ALL, 0).unwrap();
        assert_eq!(zero.words_per_op(100), 1);
    }

    #[test]
    fn config_validation() {
        assert!(EdaConfig::new(1.5, 8, EdaOp::ALL, 0).is_err());
        assert!("rd".parse::<EdaOp>().is_err());
        assert_eq!("RI".parse::<EdaOp>().unwrap(), EdaOp::RandomInsertion);
        let cfg = EdaConfig::new(
            0.1,
            2,
            [EdaOp::RandomSwap, EdaOp::SynonymReplacement, EdaOp::RandomSwap],
            0,
        )
        .unwrap();
        assert_eq!(cfg.ops(), &[EdaOp::SynonymReplacement, EdaOp::RandomSwap]);
    }

    #[test]
    fn lexicon_parsing() {
        let l = Lexicon::parse("happy\tglad, joyful,happy\n\n# comment\nsad\tsad\n", "m").unwrap();
        assert_eq!(l.synonyms("happy").unwrap(), &["glad", "joyful"]);
        assert!(l.synonyms("sad").is_none());
        assert!(Lexicon::parse("nosynonyms\n", "m").is_err());
        assert!(Lexicon::parse("a\tice cream\n", "m").is_err());
    }
}
