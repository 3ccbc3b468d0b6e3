#![allow(dead_code)]

use emopp::corpus::{
    generate_synthetic_corpus, split_corpus, AlignedUtterance, BreakSequence, DataSplits, Emotion,
    SplitRatios, SyntheticConfig, WordInterval,
};
use emopp::model::{ModelConfig, Variant};
use proptest::prelude::*;

pub const VARIANTS: [Variant; 4] = [
    Variant::Emopp,
    Variant::EncoderOnly,
    Variant::RecurrentOnly,
    Variant::EmoppLinearEmotion,
];

pub fn emo(s: &str) -> Emotion {
    Emotion::new(s).unwrap()
}

pub fn seq(labels: &[u8]) -> BreakSequence {
    BreakSequence::new(labels.to_vec()).unwrap()
}

/// Words with the given gaps (seconds) after each of them, 0.2 s per word.
pub fn aligned_with_gaps(gaps: &[f64]) -> AlignedUtterance {
    let mut t = 0.0;
    let mut words = Vec::new();
    for (i, g) in gaps.iter().enumerate() {
        words.push(WordInterval::new(format!("w{i}"), t, t + 0.2).unwrap());
        t += 0.2 + g;
    }
    AlignedUtterance::new("u", "spk", emo("neutral"), words, vec![]).unwrap()
}

/// Gap lists of 1 to 12 words, each gap 0 to 200 ms in whole milliseconds.
pub fn arb_gaps() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u32..=200).prop_map(|ms| ms as f64 / 1000.0), 1..12)
}

pub fn arb_breaks(max_len: usize) -> impl Strategy<Value = BreakSequence> {
    prop::collection::vec(any::<bool>(), 1..=max_len).prop_map(BreakSequence::from_flags)
}

/// Small dimensions for fast tests.
pub fn tiny_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        encoder_dim: 8,
        emotion_embedding_dim: 4,
        decoder_hidden: 4,
        token_embedding_dim: 6,
        word_embedding_dim: 10,
        encoder_layers: 2,
        ..ModelConfig::default().with_variant(variant)
    }
}

pub fn coupled_splits(n: usize, seed: u64) -> DataSplits {
    let corpus = generate_synthetic_corpus(&SyntheticConfig::coupled(n), seed).unwrap();
    split_corpus(&corpus, SplitRatios::default(), seed).unwrap()
}
