use std::collections::BTreeMap;

use exist_core::analysis::{
    filtered_confusion, length_bucket_counts, misclassification_breakdown, TermFilter,
};
use exist_core::augment::{augment_dataset, random_swap, EdaConfig, EdaOp, Lexicon};
use exist_core::corpus::{split_train_val, Dataset, Example, Source, Task, Task1Label, Task2Label};
use exist_core::embed::{encode, ContextualStore, Vocab};
use exist_core::eval::{metrics, ConfusionMatrix};
use exist_core::preprocess::{normalize, tokenize, PreprocessConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn messy_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-zA-Z]{1,8}",
        "@[a-zA-Z_0-9]{1,6}",
        "#[A-Za-z]{1,6}",
        "https?://[a-z./]{1,10}",
        "www\\.[a-z]{1,5}\\.com",
        "URL",
        "[!?.,'’‘“”\\-*&%$]{1,3}",
        "[ \t\r\n]{1,2}",
        "[0-9]{1,4}",
        "\\PC{1,3}",
        Just("not".to_string()),
        Just("don't".to_string()),
    ];
    prop::collection::vec(piece, 0..16).prop_map(|v| v.concat())
}

fn example(i: usize, source: bool, text: String, t2: usize) -> Example {
    let t2 = Task2Label::from_index(t2).unwrap();
    let t1 = if t2.is_sexist() {
        Task1Label::Sexist
    } else {
        Task1Label::NonSexist
    };
    let source = if source { Source::Twitter } else { Source::Gab };
    Example::new(format!("e{i}"), source, text, t1, t2).unwrap()
}

fn dataset(max: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec((any::<bool>(), "[a-z]{1,6}( [a-z]{1,6}){0,12}", 0usize..6), 1..max).prop_map(
        |rows| {
            let ex = rows
                .into_iter()
                .enumerate()
                .map(|(i, (s, t, y))| example(i, s, t, y))
                .collect();
            Dataset::new(ex, "generated").unwrap()
        },
    )
}

fn lexicon() -> Lexicon {
    let mut lex = Lexicon::default();
    lex.insert("good", ["fine".to_string(), "great".to_string()]);
    lex.insert("women", ["ladies".to_string()]);
    lex.insert("car", ["vehicle".to_string(), "auto".to_string()]);
    lex
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn normalize_is_idempotent_with_clean_charset(text in messy_text()) {
        let cfg = PreprocessConfig::default();
        let once = normalize(&text, &cfg);
        prop_assert_eq!(normalize(&once, &cfg), once.clone());
        prop_assert!(!once.starts_with(' ') && !once.ends_with(' ') && !once.contains("  "));
        prop_assert_eq!(once.to_lowercase(), once.clone());
        prop_assert!(once.chars().all(|c| c == ' ' || c == '\'' || c.is_alphanumeric()));
    }

    #[test]
    fn not_survives(prefix in messy_text(), suffix in messy_text()) {
        let text = format!("{prefix} not {suffix}");
        let cfg = PreprocessConfig::default();
        prop_assert!(tokenize(&normalize(&text, &cfg)).iter().any(|t| t == "not"));
    }

    #[test]
    fn tsv_round_trip_and_split_partition(d in dataset(40)) {
        let back = Dataset::parse_tsv(&d.to_tsv().unwrap(), "again").unwrap();
        prop_assert_eq!(&back.examples, &d.examples);
        if d.len() >= 2 {
            let (train, val) = split_train_val(&d).unwrap();
            let joined: Vec<_> = train.iter().chain(val.iter()).cloned().collect();
            prop_assert_eq!(joined, d.examples.clone());
            prop_assert!(!train.is_empty() && !val.is_empty());
        }
        for task in [Task::Task1, Task::Task2] {
            let total: f64 = d.class_distribution(task).unwrap().values().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn augmentation_sizes_labels_and_vocabulary(d in dataset(12), seed in any::<u64>()) {
        let lex = lexicon();
        let mut cfg = EdaConfig::default();
        cfg.seed = seed;
        let out = augment_dataset(&d, &cfg, &lex);
        prop_assert_eq!(out.len(), d.len() * 9);
        for (k, group) in out.examples.chunks(9).enumerate() {
            let original = &d.examples[k];
            prop_assert_eq!(&group[0], original);
            let mut allowed: Vec<String> = tokenize(&original.text);
            for t in tokenize(&original.text) {
                if let Some(s) = lex.synonyms(&t) {
                    allowed.extend(s.iter().cloned());
                }
            }
            for v in &group[1..] {
                prop_assert_eq!((v.task1, v.task2, v.source), (original.task1, original.task2, original.source));
                for t in tokenize(&v.text) {
                    prop_assert!(allowed.contains(&t), "{} not from original or lexicon", t);
                }
            }
        }
        prop_assert_eq!(augment_dataset(&d, &cfg, &lex), out);
    }

    #[test]
    fn no_ops_is_identity(d in dataset(8)) {
        let cfg = EdaConfig::new(0.0, 3, Vec::<EdaOp>::new(), 1).unwrap();
        let out = augment_dataset(&d, &cfg, &lexicon());
        for (k, group) in out.examples.chunks(4).enumerate() {
            for v in group {
                prop_assert_eq!(&v.text, &d.examples[k].text);
            }
        }
    }

    #[test]
    fn swap_preserves_multiset(tokens in prop::collection::vec("[a-c]{1,2}", 0..12), n in 0usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = random_swap(&tokens, n, &mut rng);
        let mut b = tokens.clone();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn encode_length_is_fixed(tokens in prop::collection::vec("[a-e]{1,3}", 0..40), max_len in 1usize..30) {
        let vocab = Vocab::from_tokens(["a", "b", "c", "dd"]);
        let ids = encode(&tokens, &vocab, max_len);
        prop_assert_eq!(ids.len(), max_len);
        prop_assert!(ids.iter().all(|&i| (i as usize) < vocab.len()));
    }

    #[test]
    fn cemb_round_trip(rows in prop::collection::vec(1usize..5, 0..6), dim in 1usize..5) {
        let mut store = ContextualStore::new(dim).unwrap();
        for (i, &len) in rows.iter().enumerate() {
            let data = (0..len * dim).map(|k| (k as f32 * 0.25) - i as f32).collect();
            store.insert(format!("id{i}"), data).unwrap();
        }
        let bytes = store.to_bytes();
        let back = ContextualStore::read_from(&bytes[..]).unwrap();
        prop_assert_eq!(&back, &store);
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn metrics_match_naive_recount(k in prop::sample::select(vec![2usize, 6]), pairs in prop::collection::vec((0usize..6, 0usize..6), 1..300)) {
        let truth: Vec<usize> = pairs.iter().map(|p| p.0 % k).collect();
        let preds: Vec<usize> = pairs.iter().map(|p| p.1 % k).collect();
        let task = if k == 2 { Task::Task1 } else { Task::Task2 };
        let cm = ConfusionMatrix::new(&truth, &preds, &task.label_space()).unwrap();
        let m = metrics(&cm);
        let oracle = naive(&truth, &preds, k);
        prop_assert!((m.accuracy - oracle[0]).abs() < 1e-12);
        prop_assert!((m.macro_precision - oracle[1]).abs() < 1e-12);
        prop_assert!((m.macro_recall - oracle[2]).abs() < 1e-12);
        prop_assert!((m.macro_f1 - oracle[3]).abs() < 1e-12);
        for row in cm.normalized() {
            let s: f64 = row.iter().sum();
            prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
        }
        // joint permutation and count scaling leave metrics unchanged
        let mut rt: Vec<(usize, usize)> = truth.iter().copied().zip(preds.iter().copied()).collect();
        rt.reverse();
        let (t2, p2): (Vec<usize>, Vec<usize>) = rt.into_iter().unzip();
        prop_assert_eq!(metrics(&ConfusionMatrix::new(&t2, &p2, &task.label_space()).unwrap()), m);
        let scaled = ConfusionMatrix::from_counts(cm.labels.clone(), cm.counts.iter().map(|r| r.iter().map(|c| c * 3).collect()).collect()).unwrap();
        let ms = metrics(&scaled);
        prop_assert!((ms.macro_f1 - m.macro_f1).abs() < 1e-12 && (ms.accuracy - m.accuracy).abs() < 1e-12);
    }

    #[test]
    fn analysis_partitions(d in dataset(40), seed in any::<u64>()) {
        let counts = length_bucket_counts(&d);
        prop_assert_eq!(counts.iter().sum::<usize>(), d.len());
        let preds: Vec<usize> = (0..d.len()).map(|i| ((seed >> (i % 60)) as usize + i) % 6).collect();
        let everything = TermFilter::prefix("any", "").err();
        prop_assert!(everything.is_some());
        let all = TermFilter::any_of("all", d.iter().flat_map(|e| tokenize(&e.text)).collect::<Vec<_>>()).unwrap();
        let p1: Vec<usize> = preds.iter().map(|&p| usize::from(p != 0)).collect();
        let (cm, n) = filtered_confusion(&d, &p1, Task::Task1, &all).unwrap();
        prop_assert_eq!(n, d.len());
        prop_assert_eq!(cm, ConfusionMatrix::new(&d.labels(Task::Task1), &p1, &Task::Task1.label_space()).unwrap());
        let b = misclassification_breakdown(&d, &preds).unwrap();
        if !b.is_empty() {
            prop_assert!((b.values().sum::<f64>() - 100.0).abs() < 0.1);
        }
    }
}

fn naive(truth: &[usize], preds: &[usize], k: usize) -> [f64; 4] {
    let n = truth.len() as f64;
    let acc = truth.iter().zip(preds).filter(|(t, p)| t == p).count() as f64 / n;
    let mut per: BTreeMap<usize, (f64, f64, f64)> = BTreeMap::new();
    for c in 0..k {
        let tp = truth.iter().zip(preds).filter(|&(&t, &p)| t == c && p == c).count() as f64;
        let fp = truth.iter().zip(preds).filter(|&(&t, &p)| t != c && p == c).count() as f64;
        let fn_ = truth.iter().zip(preds).filter(|&(&t, &p)| t == c && p != c).count() as f64;
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        per.insert(c, (p, r, f));
    }
    let mean = |f: fn(&(f64, f64, f64)) -> f64| per.values().map(f).sum::<f64>() / k as f64;
    [acc, mean(|x| x.0), mean(|x| x.1), mean(|x| x.2)]
}
