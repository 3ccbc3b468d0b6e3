//! Synthetic emotion-conditioned corpora.
//!
//! Texts are drawn from a pseudo-word vocabulary sprinkled with *trigger*
//! tokens. Each emotion has its own policy: a base break probability for any
//! word, plus a break probability after its own trigger tokens. In
//! non-parallel mode every utterance also carries a few emotion *cue* tokens,
//! which is what makes the emotion recoverable from text. The policy table is
//! therefore the ground truth of how much the emotion tells about breaks.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{tokenize_text, BreakSequence, Corpus, Emotion, Split, Utterance};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionPolicy {
    pub emotion: Emotion,
    /// Break probability after any non-trigger word.
    pub base_break_prob: f64,
    /// Tokens after which this emotion breaks with `trigger_prob`.
    #[serde(default)]
    pub trigger_tokens: Vec<String>,
    #[serde(default)]
    pub trigger_prob: f64,
    /// Tokens inserted into non-parallel texts to signal this emotion.
    #[serde(default)]
    pub cue_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Number of plain pseudo-words.
    pub vocab_size: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Utterance count, or distinct texts when `parallel` is set.
    pub num_texts: usize,
    #[serde(default = "one")]
    pub num_speakers: usize,
    /// Every text is realized once per speaker and emotion.
    #[serde(default)]
    pub parallel: bool,
    /// Probability that a position holds a trigger token.
    pub trigger_rate: f64,
    /// Cue tokens per utterance (ignored in parallel mode).
    #[serde(default)]
    pub cues_per_utterance: usize,
    pub emotions: Vec<EmotionPolicy>,
}

fn one() -> usize {
    1
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Deterministic pronounceable pseudo-word with at least two CV syllables.
pub fn pseudo_word(index: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut n = index + base;
    let mut syllables = Vec::new();
    while n > 0 {
        let d = n % base;
        syllables.push([CONSONANTS[d / VOWELS.len()], VOWELS[d % VOWELS.len()]]);
        n /= base;
    }
    syllables
        .iter()
        .rev()
        .flat_map(|s| s.iter().map(|&b| b as char))
        .collect()
}

const TRIGGERS: [&str; 10] = [
    "and", "so", "then", "oh", "said", "but", "because", "well", "yes", "now",
];

const CUES: [(&str, [&str; 2]); 5] = [
    ("neutral", ["okay", "fine"]),
    ("happy", ["great", "wonderful"]),
    ("angry", ["hell", "damn"]),
    ("sad", ["sorry", "miss"]),
    ("surprise", ["wow", "really"]),
];

impl SyntheticConfig {
    /// Five emotions, each breaking after its own four of ten trigger tokens
    /// (every trigger is shared by two emotions). Without knowing the emotion a
    /// trigger is followed by a break less than half of the time.
    pub fn coupled(num_utterances: usize) -> Self {
        let emotions = CUES
            .iter()
            .enumerate()
            .map(|(e, (name, cues))| EmotionPolicy {
                emotion: Emotion::new(name).unwrap(),
                base_break_prob: 0.03,
                trigger_tokens: TRIGGERS
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % 5 == e || i % 5 == (e + 1) % 5)
                    .map(|(_, t)| t.to_string())
                    .collect(),
                trigger_prob: 0.95,
                cue_tokens: cues.iter().map(|c| c.to_string()).collect(),
            })
            .collect();
        SyntheticConfig {
            vocab_size: 120,
            min_words: 5,
            max_words: 14,
            num_texts: num_utterances,
            num_speakers: 4,
            parallel: false,
            trigger_rate: 0.3,
            cues_per_utterance: 1,
            emotions,
        }
    }

    /// Same texts as [`SyntheticConfig::coupled`], but every emotion follows one
    /// shared policy: breaks depend on the tokens only.
    pub fn uncoupled(num_utterances: usize) -> Self {
        let mut cfg = Self::coupled(num_utterances);
        for policy in &mut cfg.emotions {
            policy.trigger_tokens = TRIGGERS.iter().map(|t| t.to_string()).collect();
        }
        cfg
    }

    /// Parallel texts (each read in all five emotions) for SMC analysis.
    pub fn parallel(num_texts: usize, num_speakers: usize) -> Self {
        let mut cfg = Self::coupled(num_texts);
        cfg.parallel = true;
        cfg.num_speakers = num_speakers;
        cfg.cues_per_utterance = 0;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(Error::config("vocab_size must be positive"));
        }
        if self.emotions.is_empty() {
            return Err(Error::config("emotion inventory is empty"));
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(Error::config(format!(
                "invalid utterance length range {}..={}",
                self.min_words, self.max_words
            )));
        }
        if self.num_texts == 0 || self.num_speakers == 0 {
            return Err(Error::config("num_texts and num_speakers must be positive"));
        }
        if !(0.0..=1.0).contains(&self.trigger_rate) {
            return Err(Error::config("trigger_rate must be in [0, 1]"));
        }
        let mut seen = HashSet::new();
        for p in &self.emotions {
            if !seen.insert(&p.emotion) {
                return Err(Error::config(format!("emotion {} listed twice", p.emotion)));
            }
            for (name, prob) in [("base_break_prob", p.base_break_prob), ("trigger_prob", p.trigger_prob)] {
                if !(0.0..=1.0).contains(&prob) {
                    return Err(Error::config(format!("{}: {name} must be in [0, 1]", p.emotion)));
                }
            }
            for token in p.trigger_tokens.iter().chain(&p.cue_tokens) {
                if tokenize_text(token) != [token.as_str()] {
                    return Err(Error::config(format!(
                        "{}: token {token:?} is not a single plain word",
                        p.emotion
                    )));
                }
            }
        }
        if self.trigger_rate > 0.0 && self.emotions.iter().all(|p| p.trigger_tokens.is_empty()) {
            return Err(Error::config("trigger_rate > 0 but no trigger tokens are defined"));
        }
        Ok(())
    }

    pub fn inventory(&self) -> Vec<Emotion> {
        self.emotions.iter().map(|p| p.emotion.clone()).collect()
    }

    fn trigger_pool(&self) -> Vec<String> {
        let mut pool: Vec<String> = Vec::new();
        for t in self.emotions.iter().flat_map(|p| &p.trigger_tokens) {
            if !pool.contains(t) {
                pool.push(t.clone());
            }
        }
        pool
    }
}

struct Generator<'a> {
    config: &'a SyntheticConfig,
    plain: Vec<String>,
    triggers: Vec<String>,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn text(&mut self) -> Vec<String> {
        let len = self.rng.gen_range(self.config.min_words..=self.config.max_words);
        (0..len)
            .map(|_| {
                if !self.triggers.is_empty() && self.rng.gen_bool(self.config.trigger_rate) {
                    self.triggers.choose(&mut self.rng).unwrap().clone()
                } else {
                    self.plain.choose(&mut self.rng).unwrap().clone()
                }
            })
            .collect()
    }

    fn insert_cues(&mut self, words: &mut [String], policy: &EmotionPolicy) {
        if policy.cue_tokens.is_empty() {
            return;
        }
        let n = self.config.cues_per_utterance.min(words.len());
        let positions = rand::seq::index::sample(&mut self.rng, words.len(), n).into_vec();
        for pos in positions {
            words[pos] = policy.cue_tokens.choose(&mut self.rng).unwrap().clone();
        }
    }

    fn breaks(&mut self, words: &[String], policy: &EmotionPolicy) -> BreakSequence {
        let flags: Vec<bool> = words
            .iter()
            .map(|w| {
                let p = if policy.trigger_tokens.contains(w) {
                    policy.trigger_prob
                } else {
                    policy.base_break_prob
                };
                self.rng.gen_bool(p)
            })
            .collect();
        BreakSequence::from_flags(flags)
    }
}

fn utterance(id: String, speaker: String, emotion: &Emotion, words: Vec<String>, breaks: BreakSequence) -> Utterance {
    Utterance {
        id,
        speaker,
        emotion: emotion.clone(),
        text: format!("{}.", words.join(" ")),
        words,
        breaks: Some(breaks),
    }
}

/// Pure function of `(config, seed)`.
pub fn generate_synthetic_corpus(config: &SyntheticConfig, seed: u64) -> Result<Corpus> {
    config.validate()?;
    let reserved: HashSet<&String> = config
        .emotions
        .iter()
        .flat_map(|p| p.trigger_tokens.iter().chain(&p.cue_tokens))
        .collect();
    let plain: Vec<String> = (0..config.vocab_size)
        .map(pseudo_word)
        .filter(|w| !reserved.contains(w))
        .collect();
    let mut gen = Generator {
        config,
        plain,
        triggers: config.trigger_pool(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };

    let mut utterances = Vec::new();
    if config.parallel {
        let mut seen_texts = HashSet::new();
        for t in 0..config.num_texts {
            let mut words = gen.text();
            let mut attempts = 0;
            while !seen_texts.insert(words.clone()) {
                attempts += 1;
                if attempts > 1000 {
                    return Err(Error::config(
                        "cannot draw enough distinct texts; enlarge vocab_size or the length range",
                    ));
                }
                words = gen.text();
            }
            for s in 0..config.num_speakers {
                for policy in &config.emotions {
                    let breaks = gen.breaks(&words, policy);
                    utterances.push(utterance(
                        format!("s{s:02}_t{t:05}_{}", policy.emotion),
                        format!("spk{s:02}"),
                        &policy.emotion,
                        words.clone(),
                        breaks,
                    ));
                }
            }
        }
    } else {
        for i in 0..config.num_texts {
            let policy = config.emotions.choose(&mut gen.rng).unwrap();
            let speaker = gen.rng.gen_range(0..config.num_speakers);
            let mut words = gen.text();
            gen.insert_cues(&mut words, policy);
            let breaks = gen.breaks(&words, policy);
            utterances.push(utterance(
                format!("u{i:05}"),
                format!("spk{speaker:02}"),
                &policy.emotion,
                words,
                breaks,
            ));
        }
    }
    Corpus::with_inventory(utterances, config.inventory(), Split::Unsplit)
}
