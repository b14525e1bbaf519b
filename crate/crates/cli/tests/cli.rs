mod common;

use std::fs;

use exist_core::corpus::load_dataset;
use exist_core::embed::ContextualStore;
use serde_json::Value;

use common::{exist, marker_corpus, p, stderr, stdout, write, SMALL_MODEL};

#[test]
fn usage_errors_exit_2_and_runtime_errors_exit_1() {
    assert_eq!(exist(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(exist(&["baseline"]).status.code(), Some(2));
    assert_eq!(exist(&["baseline", "--test", "x.tsv", "--task", "3"]).status.code(), Some(2));
    assert_eq!(exist(&["train", "--train", "x", "--out", "y", "--dropout", "1.5"]).status.code(), Some(2));
    assert_eq!(exist(&["train", "--train", "x", "--out", "y", "--embeddings", "glove"]).status.code(), Some(2));
    assert_eq!(exist(&["runs", "--train", "x", "--test", "x", "--out", "y", "--n", "0"]).status.code(), Some(2));
    assert_eq!(exist(&["--help"]).status.code(), Some(0));

    let missing = exist(&["baseline", "--test", "/nonexistent/test.tsv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "id\tsource\tlanguage\ttext\ttask1\ttask2\n1\ttwitter\ten\thi\tmaybe\tnon-sexist\n").unwrap();
    let o = exist(&["baseline", "--test", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("maybe"), "{}", stderr(&o));
}

#[test]
fn augment_without_variants_copies_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.tsv");
    write(&marker_corpus(25, 4, "x"), &input);
    let out = dir.path().join("out");
    let o = exist(&["augment", "--input", p(&input), "--n-aug", "0", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(out.join("augmented.tsv")).unwrap(), fs::read(&input).unwrap());
    assert!(out.join("manifest.json").exists());

    let o = exist(&["augment", "--input", p(&input), "--ops", "sr,rd", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn preprocess_writes_normalized_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.tsv");
    fs::write(
        &input,
        "id\tsource\tlanguage\ttext\ttask1\ttask2\n\
         1\ttwitter\ten\t@user This is a super news for the #WomensRights.\tnon-sexist\tnon-sexist\n\
         2\tgab\tes\tHola\tnon-sexist\tnon-sexist\n\
         3\tgab\ten\tafter all URL\tsexist\tstereotyping-dominance\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = exist(&["preprocess", "--input", p(&input), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d = load_dataset(out.join("preprocessed.tsv")).unwrap();
    let texts: Vec<&str> = d.iter().map(|e| e.text.as_str()).collect();
    assert_eq!(texts, ["username this is a super news for the womensrights", "after all"]);

    let o = exist(&["preprocess", "--input", p(&input), "--keep-url-literal", "--mention-token", "user", "--out", p(&out)]);
    assert!(o.status.success());
    let d = load_dataset(out.join("preprocessed.tsv")).unwrap();
    assert_eq!(d.examples[0].text, "user this is a super news for the womensrights");
    assert_eq!(d.examples[1].text, "after all url");
}

#[test]
fn train_evaluate_analyze_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (dir.path().join("train.tsv"), dir.path().join("test.tsv"));
    write(&marker_corpus(150, 10, "tr"), &train);
    write(&marker_corpus(60, 11, "te"), &test);

    let mut checkpoints = Vec::new();
    for task in ["1", "2"] {
        let out = dir.path().join(format!("model{task}"));
        let mut args = vec!["train", "--train", p(&train), "--task", task, "--out", p(&out)];
        args.extend(SMALL_MODEL);
        let o = exist(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        for f in ["model.ckpt", "history.json", "spec.txt", "manifest.json"] {
            assert!(out.join(f).exists(), "{f}");
        }
        checkpoints.push(out.join("model.ckpt"));
    }

    let eval_out = dir.path().join("eval");
    let o = exist(&["evaluate", "--checkpoint", p(&checkpoints[1]), "--test", p(&test), "--out", p(&eval_out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["labels"].as_array().unwrap().len(), 6);
    let total: u64 = report["confusion"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|v| v.as_u64().unwrap()))
        .sum();
    assert_eq!(total, 60);
    let preds = fs::read_to_string(eval_out.join("predictions.tsv")).unwrap();
    assert_eq!(preds.lines().count(), 61);
    assert!(preds.starts_with("id\tlabel\tp_non-sexist"));

    let analysis = dir.path().join("analysis");
    let o = exist(&[
        "analyze", "--test", p(&test), "--checkpoint", p(&checkpoints[0]), "--checkpoint", p(&checkpoints[1]),
        "--filter", "kitchen=any:kitchen,cook", "--out", p(&analysis),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&fs::read(analysis.join("analysis.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["filters"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names.last(), Some(&"kitchen"));
    assert_eq!(names.len(), 4);
    let buckets: u64 = report["length_buckets"].as_array().unwrap().iter().map(|b| b["count"].as_u64().unwrap()).sum();
    assert_eq!(buckets, 60);
    assert!(report["misclassified_as_non_sexist"].is_object());

    let twice = exist(&["analyze", "--test", p(&test), "--checkpoint", p(&checkpoints[0]), "--checkpoint", p(&checkpoints[0]), "--out", p(&analysis)]);
    assert_eq!(twice.status.code(), Some(1));

    for name in ["model1", "eval", "analysis"] {
        let replayed = dir.path().join(format!("replay-{name}"));
        let o = exist(&["replay", "--manifest", p(&dir.path().join(name)), "--out", p(&replayed)]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }

    // a changed input is refused
    write(&marker_corpus(150, 12, "tr"), &train);
    let o = exist(&["replay", "--manifest", p(&dir.path().join("model1")), "--out", p(&dir.path().join("again"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("changed"));
}

#[test]
fn pretrained_and_contextual_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (dir.path().join("train.tsv"), dir.path().join("test.tsv"));
    let train_set = marker_corpus(80, 20, "tr");
    let test_set = marker_corpus(30, 21, "te");
    write(&train_set, &train);
    write(&test_set, &test);

    let table = dir.path().join("vectors.txt");
    let words = ["the", "kitchen", "cook", "weather", "coffee", "people", "username"];
    let body: String = words
        .iter()
        .enumerate()
        .map(|(i, w)| format!("{w} {} {} {}\n", i as f32 * 0.1, -(i as f32) * 0.05, 0.3))
        .collect();
    fs::write(&table, body).unwrap();
    for kind in ["table", "table-finetune"] {
        let out = dir.path().join(kind);
        let emb = format!("{kind}:{}", p(&table));
        let mut args = vec!["runs", "--n", "2", "--train", p(&train), "--test", p(&test), "--embeddings", &emb, "--out", p(&out)];
        args.extend(SMALL_MODEL);
        let o = exist(&args);
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
        assert!(out.join("run-0/metrics.json").exists() && out.join("run-1/model.ckpt").exists());
    }

    let cemb = dir.path().join("vectors.cemb");
    let mut store = ContextualStore::new(4).unwrap();
    for e in train_set.iter().chain(test_set.iter()) {
        let len = e.text.split(' ').count() + 2;
        let data = (0..len * 4).map(|k| ((k * 7 + e.id.len()) % 11) as f32 / 11.0 - 0.5).collect();
        store.insert(e.id.clone(), data).unwrap();
    }
    store.save(&cemb).unwrap();
    let out = dir.path().join("contextual");
    let emb = format!("contextual:{}", p(&cemb));
    let mut args = vec!["train", "--train", p(&train), "--embeddings", &emb, "--out", p(&out)];
    args.extend(SMALL_MODEL);
    let o = exist(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = out.join("model.ckpt");

    let without = exist(&["evaluate", "--checkpoint", p(&ckpt), "--test", p(&test), "--out", p(&dir.path().join("e1"))]);
    assert_eq!(without.status.code(), Some(1));
    let with = exist(&["evaluate", "--checkpoint", p(&ckpt), "--test", p(&test), "--contextual", p(&cemb), "--out", p(&dir.path().join("e2"))]);
    assert!(with.status.success(), "{}", stderr(&with));
}
