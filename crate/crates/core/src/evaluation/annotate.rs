use crate::corpus::{strip_punctuation, BreakSequence};
use crate::{Error, Result};

pub const DEFAULT_MARKER: &str = "|";

/// Inserts `marker` after every word labeled as a break. Punctuation attached
/// to a word stays with it ("here. |"); tokens that are pure punctuation
/// belong to the preceding word.
pub fn annotate_breaks(text: &str, predicted: &BreakSequence, marker: &str) -> Result<String> {
    let chunks: Vec<&str> = text.split_whitespace().collect();
    let is_word: Vec<bool> = chunks.iter().map(|c| !strip_punctuation(c).is_empty()).collect();
    let n_words = is_word.iter().filter(|&&w| w).count();
    if n_words != predicted.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: n_words,
            context: Some("break labels vs words in text".into()),
        });
    }
    if predicted.count_breaks() == 0 {
        return Ok(text.to_string());
    }
    Ok(rebuild(&chunks, &is_word, predicted, marker))
}

fn rebuild(chunks: &[&str], is_word: &[bool], predicted: &BreakSequence, marker: &str) -> String {
    let mut out: Vec<&str> = Vec::with_capacity(chunks.len() + predicted.count_breaks());
    let mut word = 0;
    let mut pending_marker = false;
    for (k, chunk) in chunks.iter().enumerate() {
        if is_word[k] && pending_marker {
            out.push(marker);
            pending_marker = false;
        }
        out.push(chunk);
        if is_word[k] {
            pending_marker = predicted.labels()[word] == 1;
            word += 1;
        }
    }
    if pending_marker {
        out.push(marker);
    }
    out.join(" ")
}

/// Drops every standalone `marker` token.
pub fn strip_markers(annotated: &str, marker: &str) -> String {
    annotated
        .split_whitespace()
        .filter(|t| *t != marker)
        .collect::<Vec<_>>()
        .join(" ")
}
