//! Word-piece style tokenizer built from a training corpus.
//!
//! Words seen in training are single pieces. Anything else is split greedily
//! into the longest known prefixes, with continuation pieces marked `##`; since
//! every training character is a piece, most unseen words still tokenize.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::{Error, Result};

pub const UNK: usize = 0;
const UNK_PIECE: &str = "[UNK]";
const CONTINUATION: &str = "##";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tokenizer {
    pieces: Vec<String>,
    /// Longest allowed piece sequence for one word.
    pub max_pieces_per_word: usize,
    /// Longest allowed piece sequence for one utterance.
    pub max_tokens: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for Tokenizer {
    fn eq(&self, other: &Self) -> bool {
        self.pieces == other.pieces
            && self.max_pieces_per_word == other.max_pieces_per_word
            && self.max_tokens == other.max_tokens
    }
}

/// Piece ids of an utterance plus the piece range of every word.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedText {
    pub pieces: Vec<usize>,
    pub spans: Vec<Range<usize>>,
    /// Whole-word ids (`UNK` for unseen words), for word-level embeddings.
    pub word_ids: Vec<usize>,
}

impl Tokenizer {
    pub fn from_pieces(pieces: Vec<String>, max_pieces_per_word: usize, max_tokens: usize) -> Self {
        let mut tok = Tokenizer {
            pieces,
            max_pieces_per_word,
            max_tokens,
            index: HashMap::new(),
        };
        tok.rebuild_index();
        tok
    }

    /// Vocabulary from the words of `corpus` occurring at least `min_count`
    /// times, plus single-character pieces.
    pub fn build(corpus: &Corpus, min_count: usize, max_pieces_per_word: usize, max_tokens: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut order: Vec<String> = Vec::new();
        let mut chars: Vec<char> = Vec::new();
        for word in corpus.utterances.iter().flat_map(|u| &u.words) {
            let w = word.to_lowercase();
            for c in w.chars() {
                if !chars.contains(&c) {
                    chars.push(c);
                }
            }
            let n = counts.entry(w.clone()).or_insert(0);
            if *n == 0 {
                order.push(w);
            }
            *n += 1;
        }
        let mut pieces = vec![UNK_PIECE.to_string()];
        pieces.extend(order.into_iter().filter(|w| counts[w] >= min_count.max(1)));
        chars.sort_unstable();
        for c in chars {
            let single = c.to_string();
            if !pieces.contains(&single) {
                pieces.push(single);
            }
            pieces.push(format!("{CONTINUATION}{c}"));
        }
        Self::from_pieces(pieces, max_pieces_per_word, max_tokens)
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
    }

    pub fn vocab_size(&self) -> usize {
        self.pieces.len()
    }

    pub fn piece(&self, id: usize) -> &str {
        &self.pieces[id]
    }

    pub fn word_id(&self, word: &str) -> usize {
        let w = word.to_lowercase();
        if w.starts_with(CONTINUATION) {
            return UNK;
        }
        self.index.get(&w).copied().unwrap_or(UNK)
    }

    /// Greedy longest-match split; a word with an unknown character maps to
    /// a single `UNK`.
    pub fn tokenize_word(&self, word: &str) -> Vec<usize> {
        let w = word.to_lowercase();
        if let Some(&id) = self.index.get(&w).filter(|_| !w.starts_with(CONTINUATION)) {
            return vec![id];
        }
        let chars: Vec<char> = w.chars().collect();
        let mut out = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut found = None;
            for end in (start + 1..=chars.len()).rev() {
                let sub: String = chars[start..end].iter().collect();
                let key = if start == 0 { sub } else { format!("{CONTINUATION}{sub}") };
                if let Some(&id) = self.index.get(&key) {
                    found = Some((id, end));
                    break;
                }
            }
            match found {
                Some((id, end)) => {
                    out.push(id);
                    start = end;
                }
                None => return vec![UNK],
            }
        }
        if out.is_empty() {
            out.push(UNK);
        }
        out
    }

    pub fn encode(&self, utterance_id: &str, words: &[String]) -> Result<EncodedText> {
        let mut pieces = Vec::new();
        let mut spans = Vec::with_capacity(words.len());
        for word in words {
            let ids = self.tokenize_word(word);
            if ids.len() > self.max_pieces_per_word {
                return Err(Error::Truncation {
                    id: utterance_id.to_string(),
                    message: format!(
                        "word {word:?} needs {} pieces, limit is {}",
                        ids.len(),
                        self.max_pieces_per_word
                    ),
                });
            }
            let start = pieces.len();
            pieces.extend(ids);
            spans.push(start..pieces.len());
        }
        if pieces.len() > self.max_tokens {
            return Err(Error::Truncation {
                id: utterance_id.to_string(),
                message: format!("{} pieces exceed the limit of {}", pieces.len(), self.max_tokens),
            });
        }
        Ok(EncodedText {
            pieces,
            spans,
            word_ids: words.iter().map(|w| self.word_id(w)).collect(),
        })
    }
}
