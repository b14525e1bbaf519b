use exist_core::preprocess::{normalize, PreprocessConfig};

const GOLDEN: &str = include_str!("fixtures/preprocess_golden.tsv");

#[test]
fn golden_normalizations_match_exactly() {
    let cfg = PreprocessConfig::default();
    let rows: Vec<(&str, &str)> = GOLDEN
        .lines()
        .skip(1)
        .map(|l| l.split_once('\t').expect("two columns"))
        .collect();
    assert_eq!(rows.len(), 22);
    for (input, expected) in rows {
        let got = normalize(input, &cfg);
        assert_eq!(got, expected, "input {input:?}");
        assert_eq!(normalize(&got, &cfg), got);
    }
}
