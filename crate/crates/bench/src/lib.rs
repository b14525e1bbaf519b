//! Seeded inputs shared by the benchmarks.

use exist_core::corpus::{Dataset, Example, Source, Task1Label, Task2Label};
use exist_core::Tensor;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-0.5..0.5)).collect())
        .expect("shape matches data")
}

const WORDS: [&str; 16] = [
    "women", "should", "not", "be", "in", "the", "kitchen", "today", "equality", "is", "a", "joke",
    "great", "news", "for", "everyone",
];
const NOISE: [&str; 6] = ["@user", "#WomensRights", "https://t.co/abc", "self-made", "URL", "!!"];

/// Tweet-like raw texts of 8 to 40 words with mentions, tags and URLs.
pub fn raw_texts(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(8..40);
            (0..len)
                .map(|_| {
                    if rng.random_bool(0.15) {
                        *NOISE.choose(&mut rng).unwrap()
                    } else {
                        *WORDS.choose(&mut rng).unwrap()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Labelled dataset over [`raw_texts`].
pub fn dataset(n: usize, seed: u64) -> Dataset {
    let examples = raw_texts(n, seed)
        .into_iter()
        .enumerate()
        .map(|(i, text)| {
            let t2 = Task2Label::from_index(i % 6).unwrap();
            let t1 = if t2.is_sexist() {
                Task1Label::Sexist
            } else {
                Task1Label::NonSexist
            };
            Example::new(format!("b{i}"), Source::Twitter, text, t1, t2).unwrap()
        })
        .collect();
    Dataset::new(examples, "bench").unwrap()
}
