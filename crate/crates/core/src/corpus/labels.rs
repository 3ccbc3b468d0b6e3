use super::{AlignedUtterance, BreakSequence, TIME_EPS};

/// A word is a break when the silence after it lasts more than 30 ms.
pub const DEFAULT_BREAK_THRESHOLD: f64 = 0.030;

/// Silence duration following each word; `None` after the final word.
pub fn following_gaps(aligned: &AlignedUtterance) -> Vec<Option<f64>> {
    let words = &aligned.words;
    (0..words.len())
        .map(|k| {
            words
                .get(k + 1)
                .map(|next| (next.start - words[k].end).max(0.0))
        })
        .collect()
}

/// Labels word `k` as a break iff the gap to word `k + 1` is strictly longer
/// than `threshold` seconds. The final word is always 0.
///
/// Gaps are compared with a 1 ns slack so that a gap written as exactly the
/// threshold (e.g. `0.43 - 0.40`) is not promoted to a break by rounding.
pub fn derive_break_labels(aligned: &AlignedUtterance, threshold: f64) -> BreakSequence {
    assert!(threshold > 0.0, "break threshold must be positive");
    BreakSequence::from_flags(
        following_gaps(aligned)
            .into_iter()
            .map(|gap| gap.is_some_and(|g| g > threshold + TIME_EPS)),
    )
}
