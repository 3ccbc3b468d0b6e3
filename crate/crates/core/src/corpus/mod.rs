//! Corpus types, forced-alignment ingestion and break-label extraction.

mod alignment;
mod io;
mod labels;
mod split;
mod synthetic;
mod text;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use alignment::{
    parse_alignment, parse_alignment_json, parse_interval_tier, AlignmentFormat, AlignmentMeta,
};
pub use io::{load_corpus, read_corpus, save_corpus, write_corpus};
pub use labels::{derive_break_labels, following_gaps, DEFAULT_BREAK_THRESHOLD};
pub use split::{split_corpus, DataSplits, SplitRatios};
pub use synthetic::{generate_synthetic_corpus, pseudo_word, EmotionPolicy, SyntheticConfig};
pub use text::{strip_punctuation, tokenize_text};

/// Emotion inventory used by the five-category setups (ESD / IEMOCAP subset).
pub const CANONICAL_EMOTIONS: [&str; 5] = ["neutral", "happy", "angry", "sad", "surprise"];

/// Utterance-level emotion label, stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Emotion(String);

impl Emotion {
    pub fn new(label: impl AsRef<str>) -> Result<Self> {
        let label = label.as_ref().trim().to_lowercase();
        if label.is_empty() {
            return Err(Error::validation("emotion label is empty"));
        }
        Ok(Emotion(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn canonical() -> Vec<Emotion> {
        CANONICAL_EMOTIONS.iter().map(|e| Emotion(e.to_string())).collect()
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Orders a set of labels: canonical emotions first in canonical order, then
/// the rest in first-seen order.
pub fn emotion_inventory<'a>(labels: impl IntoIterator<Item = &'a Emotion>) -> Vec<Emotion> {
    let mut seen: Vec<Emotion> = Vec::new();
    for label in labels {
        if !seen.contains(label) {
            seen.push(label.clone());
        }
    }
    let mut inventory: Vec<Emotion> = Emotion::canonical()
        .into_iter()
        .filter(|e| seen.contains(e))
        .collect();
    for label in seen {
        if !inventory.contains(&label) {
            inventory.push(label);
        }
    }
    inventory
}

/// One word with its aligned time span, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordInterval {
    pub word: String,
    pub start: f64,
    pub end: f64,
}

impl WordInterval {
    pub fn new(word: impl Into<String>, start: f64, end: f64) -> Result<Self> {
        let word = word.into();
        if word.trim().is_empty() {
            return Err(Error::validation(format!(
                "empty word at [{start}, {end}]"
            )));
        }
        if !(start.is_finite() && end.is_finite()) || start < 0.0 {
            return Err(Error::validation(format!(
                "word {word:?}: invalid interval [{start}, {end}]"
            )));
        }
        if end <= start {
            return Err(Error::validation(format!(
                "word {word:?}: end {end} is not after start {start}"
            )));
        }
        Ok(WordInterval {
            word: word.trim().to_string(),
            start,
            end,
        })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Word-level output of a forced aligner.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedUtterance {
    pub id: String,
    pub speaker: String,
    pub emotion: Emotion,
    pub words: Vec<WordInterval>,
    /// Sorted, merged silence spans: inter-word gaps plus explicit entries.
    pub silences: Vec<(f64, f64)>,
}

/// Slack for comparing aligner timestamps (seconds).
pub(crate) const TIME_EPS: f64 = 1e-9;

impl AlignedUtterance {
    /// Validates word ordering and merges explicit silences with the gaps
    /// between consecutive words.
    pub fn new(
        id: impl Into<String>,
        speaker: impl Into<String>,
        emotion: Emotion,
        words: Vec<WordInterval>,
        explicit_silences: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let id = id.into();
        if words.is_empty() {
            return Err(Error::validation(format!("utterance {id}: no words")));
        }
        for pair in words.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.start < a.end - TIME_EPS {
                return Err(Error::validation(format!(
                    "utterance {id}: overlapping words {:?} [{}, {}] and {:?} [{}, {}]",
                    a.word, a.start, a.end, b.word, b.start, b.end
                )));
            }
        }
        for &(s, e) in &explicit_silences {
            if !(s.is_finite() && e.is_finite()) || e <= s {
                return Err(Error::validation(format!(
                    "utterance {id}: invalid silence [{s}, {e}]"
                )));
            }
            if let Some(w) = words
                .iter()
                .find(|w| s < w.end - TIME_EPS && e > w.start + TIME_EPS)
            {
                return Err(Error::validation(format!(
                    "utterance {id}: silence [{s}, {e}] overlaps word {:?} [{}, {}]",
                    w.word, w.start, w.end
                )));
            }
        }

        let mut spans: Vec<(f64, f64)> = explicit_silences;
        spans.extend(
            words
                .windows(2)
                .filter(|p| p[1].start > p[0].end + TIME_EPS)
                .map(|p| (p[0].end, p[1].start)),
        );
        spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut silences: Vec<(f64, f64)> = Vec::with_capacity(spans.len());
        for (s, e) in spans {
            match silences.last_mut() {
                Some(last) if s <= last.1 + TIME_EPS => last.1 = last.1.max(e),
                _ => silences.push((s, e)),
            }
        }

        Ok(AlignedUtterance {
            id,
            speaker: speaker.into(),
            emotion,
            words,
            silences,
        })
    }

    pub fn word_tokens(&self) -> Vec<String> {
        self.words.iter().map(|w| w.word.clone()).collect()
    }
}

/// Binary per-word break labels. The final position is always 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct BreakSequence(Vec<u8>);

impl BreakSequence {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::validation(format!("break label {bad} is not 0 or 1")));
        }
        if labels.last() == Some(&1) {
            return Err(Error::validation(
                "break label on the final word must be 0",
            ));
        }
        Ok(BreakSequence(labels))
    }

    /// Builds a sequence from booleans, forcing the final position to 0.
    pub fn from_flags(flags: impl IntoIterator<Item = bool>) -> Self {
        let mut labels: Vec<u8> = flags.into_iter().map(u8::from).collect();
        if let Some(last) = labels.last_mut() {
            *last = 0;
        }
        BreakSequence(labels)
    }

    pub fn zeros(len: usize) -> Self {
        BreakSequence(vec![0; len])
    }

    pub fn labels(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_breaks(&self) -> usize {
        self.0.iter().filter(|&&l| l == 1).count()
    }

    /// Positions that take part in losses and metrics (all but the last).
    pub fn unmasked(&self) -> &[u8] {
        &self.0[..self.0.len().saturating_sub(1)]
    }
}

impl<'de> Deserialize<'de> for BreakSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let labels = Vec::<u8>::deserialize(d)?;
        BreakSequence::new(labels).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub emotion: Emotion,
    pub text: String,
    pub words: Vec<String>,
    pub breaks: Option<BreakSequence>,
}

impl Utterance {
    /// Tokenizes `text` into words.
    pub fn from_text(
        id: impl Into<String>,
        speaker: impl Into<String>,
        emotion: Emotion,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        Utterance {
            id: id.into(),
            speaker: speaker.into(),
            emotion,
            words: tokenize_text(&text),
            text,
            breaks: None,
        }
    }

    /// Builds a labeled utterance from alignment output; the aligned words are
    /// authoritative and the text is their space-joined form.
    pub fn from_aligned(aligned: &AlignedUtterance, breaks: BreakSequence) -> Result<Self> {
        let words: Vec<String> = aligned
            .words
            .iter()
            .map(|w| strip_punctuation(&w.word))
            .collect();
        if let Some(pos) = words.iter().position(|w| w.is_empty()) {
            return Err(Error::validation(format!(
                "utterance {}: aligned word {:?} has no letters",
                aligned.id, aligned.words[pos].word
            )));
        }
        let utt = Utterance {
            id: aligned.id.clone(),
            speaker: aligned.speaker.clone(),
            emotion: aligned.emotion.clone(),
            text: words.join(" "),
            words,
            breaks: Some(breaks),
        };
        utt.validate()?;
        Ok(utt)
    }

    pub fn with_breaks(mut self, breaks: BreakSequence) -> Result<Self> {
        self.breaks = Some(breaks);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::validation("utterance id is empty"));
        }
        if tokenize_text(&self.text) != self.words {
            return Err(Error::validation(format!(
                "utterance {}: words do not match the tokenized text",
                self.id
            )));
        }
        if let Some(b) = &self.breaks {
            if b.len() != self.words.len() {
                return Err(Error::LengthMismatch {
                    left: b.len(),
                    right: self.words.len(),
                    context: Some(format!("utterance {}: breaks vs words", self.id)),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
    Unsplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    pub emotion_inventory: Vec<Emotion>,
    pub split: Split,
}

impl Corpus {
    /// Validates every utterance and id uniqueness; the inventory is derived
    /// from the utterances.
    pub fn new(utterances: Vec<Utterance>, split: Split) -> Result<Self> {
        let inventory = emotion_inventory(utterances.iter().map(|u| &u.emotion));
        Self::with_inventory(utterances, inventory, split)
    }

    pub fn with_inventory(
        utterances: Vec<Utterance>,
        emotion_inventory: Vec<Emotion>,
        split: Split,
    ) -> Result<Self> {
        let corpus = Corpus {
            utterances,
            emotion_inventory,
            split,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::with_capacity(self.utterances.len());
        for utt in &self.utterances {
            utt.validate()?;
            if !ids.insert(utt.id.as_str()) {
                return Err(Error::validation(format!("duplicate utterance id {}", utt.id)));
            }
            if !self.emotion_inventory.contains(&utt.emotion) {
                return Err(Error::validation(format!(
                    "utterance {}: emotion {} not in inventory",
                    utt.id, utt.emotion
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Fraction of unmasked positions labeled as breaks, per emotion.
    pub fn break_rates(&self) -> Vec<(Emotion, usize, f64)> {
        self.emotion_inventory
            .iter()
            .map(|emotion| {
                let (mut n, mut breaks, mut positions) = (0, 0, 0);
                for u in self.utterances.iter().filter(|u| &u.emotion == emotion) {
                    n += 1;
                    if let Some(b) = &u.breaks {
                        breaks += b.count_breaks();
                        positions += b.unmasked().len();
                    }
                }
                let rate = if positions > 0 {
                    breaks as f64 / positions as f64
                } else {
                    0.0
                };
                (emotion.clone(), n, rate)
            })
            .collect()
    }
}
