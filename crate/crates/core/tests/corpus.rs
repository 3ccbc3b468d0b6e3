mod common;

use common::*;
use emopp::corpus::*;
use proptest::prelude::*;

#[test]
fn threshold_boundary() {
    let labels = derive_break_labels(&aligned_with_gaps(&[0.030, 0.031, 0.0]), DEFAULT_BREAK_THRESHOLD);
    assert_eq!(labels.labels(), [0, 1, 0]);
}

#[test]
fn explicit_pause_entries_count_as_gaps() {
    let src = "tier words\n0.00 0.40 I\n0.40 0.75 said\n0.75 0.79 sil\n0.79 1.10 what\n";
    let meta = AlignmentMeta {
        id: Some("x".into()),
        speaker: Some("s".into()),
        emotion: Some("angry".into()),
    };
    let aligned = parse_alignment(src, &meta).unwrap();
    assert_eq!(derive_break_labels(&aligned, 0.030).labels(), [0, 1, 0]);
    assert_eq!(derive_break_labels(&aligned, 0.050).labels(), [0, 0, 0]);
}

#[test]
fn synthetic_parallel_covers_every_emotion() {
    let cfg = SyntheticConfig::parallel(6, 2);
    let corpus = generate_synthetic_corpus(&cfg, 4).unwrap();
    assert_eq!(corpus.len(), 6 * 2 * 5);
    let mut per_text = std::collections::BTreeMap::<(String, String), Vec<String>>::new();
    for u in &corpus.utterances {
        per_text
            .entry((u.speaker.clone(), u.text.clone()))
            .or_default()
            .push(u.emotion.to_string());
    }
    assert_eq!(per_text.len(), 12);
    for emotions in per_text.values() {
        let mut e = emotions.clone();
        e.sort();
        assert_eq!(e, ["angry", "happy", "neutral", "sad", "surprise"]);
    }
}

#[test]
fn synthetic_output_is_seed_determined() {
    let cfg = SyntheticConfig::coupled(40);
    let bytes = |seed| {
        let mut out = Vec::new();
        write_corpus(&generate_synthetic_corpus(&cfg, seed).unwrap(), &mut out).unwrap();
        out
    };
    assert_eq!(bytes(9), bytes(9));
    assert_ne!(bytes(9), bytes(10));
}

#[test]
fn split_partitions_the_corpus() {
    let corpus = generate_synthetic_corpus(&SyntheticConfig::coupled(101), 0).unwrap();
    let s = split_corpus(&corpus, SplitRatios::default(), 3).unwrap();
    assert_eq!(s.train.len() + s.validation.len() + s.test.len(), 101);
    let mut ids: Vec<&str> = [&s.train, &s.validation, &s.test]
        .iter()
        .flat_map(|c| c.utterances.iter().map(|u| u.id.as_str()))
        .collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 101);
}

proptest! {
    #[test]
    fn raising_the_threshold_never_adds_breaks(gaps in arb_gaps(), t1 in 1u32..150, dt in 0u32..100) {
        let aligned = aligned_with_gaps(&gaps);
        let low = derive_break_labels(&aligned, t1 as f64 / 1000.0);
        let high = derive_break_labels(&aligned, (t1 + dt) as f64 / 1000.0);
        for (h, l) in high.labels().iter().zip(low.labels()) {
            prop_assert!(h <= l);
        }
    }

    #[test]
    fn labels_follow_the_gap_rule(gaps in arb_gaps(), t in 1u32..150) {
        let aligned = aligned_with_gaps(&gaps);
        let labels = derive_break_labels(&aligned, t as f64 / 1000.0);
        prop_assert_eq!(labels.len(), gaps.len());
        prop_assert_eq!(*labels.labels().last().unwrap(), 0);
        for (i, g) in gaps.iter().enumerate().take(gaps.len() - 1) {
            let ms = (g * 1000.0).round() as u32;
            prop_assert_eq!(labels.labels()[i] == 1, ms > t);
        }
    }

    #[test]
    fn jsonl_round_trip_is_byte_identical(seed in 0u64..1000, n in 1usize..20) {
        let corpus = generate_synthetic_corpus(&SyntheticConfig::uncoupled(n), seed).unwrap();
        let mut first = Vec::new();
        write_corpus(&corpus, &mut first).unwrap();
        let back = read_corpus(first.as_slice()).unwrap();
        prop_assert_eq!(&back.utterances, &corpus.utterances);
        let mut second = Vec::new();
        write_corpus(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn tokenized_words_have_no_edge_punctuation(text in "[ a-zA-Z,.!?']{0,40}") {
        for w in tokenize_text(&text) {
            prop_assert!(!w.is_empty());
            prop_assert!(w.chars().next().unwrap().is_alphanumeric());
            prop_assert!(w.chars().last().unwrap().is_alphanumeric());
        }
    }
}
