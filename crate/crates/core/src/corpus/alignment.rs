//! Forced-aligner output ingestion.
//!
//! Two document shapes are accepted:
//!
//! * JSON: `{"id", "speaker", "emotion", "words": [{"w", "s", "e"}], "silences": [[s, e]]}`
//! * interval tiers: either a Praat long-format TextGrid, or a plain listing
//!   where a `tier words` header is followed by `xmin xmax label` lines.
//!   Metadata may be given as leading `# key: value` lines.
//!
//! In both, empty labels and the usual aligner pause symbols are silences.

use serde::Deserialize;

use super::{AlignedUtterance, Emotion, WordInterval};
use crate::{Error, Result};

const PAUSE_LABELS: [&str; 5] = ["", "sil", "sp", "<eps>", "<sil>"];

fn is_pause(label: &str) -> bool {
    let l = label.trim().to_lowercase();
    PAUSE_LABELS.contains(&l.as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignmentFormat {
    Json,
    IntervalTier,
}

impl AlignmentFormat {
    /// Guesses the format from the first non-blank character.
    pub fn sniff(source: &str) -> Self {
        match source.trim_start().chars().next() {
            Some('{') => AlignmentFormat::Json,
            _ => AlignmentFormat::IntervalTier,
        }
    }
}

/// Fallback metadata for formats that do not carry it (TextGrids usually
/// encode id, speaker and emotion in the file path).
#[derive(Debug, Clone, Default)]
pub struct AlignmentMeta {
    pub id: Option<String>,
    pub speaker: Option<String>,
    pub emotion: Option<String>,
}

pub fn parse_alignment(source: &str, meta: &AlignmentMeta) -> Result<AlignedUtterance> {
    match AlignmentFormat::sniff(source) {
        AlignmentFormat::Json => parse_alignment_json(source),
        AlignmentFormat::IntervalTier => parse_interval_tier(source, meta),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonWord {
    w: String,
    s: f64,
    e: f64,
}

#[derive(Deserialize)]
struct JsonAlignment {
    id: String,
    speaker: String,
    emotion: String,
    words: Vec<JsonWord>,
    #[serde(default)]
    silences: Vec<(f64, f64)>,
}

pub fn parse_alignment_json(source: &str) -> Result<AlignedUtterance> {
    let doc: JsonAlignment = serde_json::from_str(source).map_err(|e| Error::Parse {
        line: Some(e.line()),
        field: "alignment".into(),
        message: e.to_string(),
    })?;
    let emotion = Emotion::new(&doc.emotion).map_err(|_| Error::Parse {
        line: None,
        field: "emotion".into(),
        message: "empty emotion label".into(),
    })?;
    let mut words = Vec::with_capacity(doc.words.len());
    let mut silences = doc.silences;
    for (i, w) in doc.words.into_iter().enumerate() {
        if is_pause(&w.w) {
            silences.push((w.s, w.e));
            continue;
        }
        words.push(WordInterval::new(w.w, w.s, w.e).map_err(|e| Error::Parse {
            line: None,
            field: format!("words[{i}]"),
            message: e.to_string(),
        })?);
    }
    AlignedUtterance::new(doc.id, doc.speaker, emotion, words, silences)
}

struct RawInterval {
    line: usize,
    start: f64,
    end: f64,
    label: String,
}

pub fn parse_interval_tier(source: &str, meta: &AlignmentMeta) -> Result<AlignedUtterance> {
    let mut meta = meta.clone();
    let intervals = if source.contains("ooTextFile") {
        parse_praat_long(source)?
    } else {
        parse_plain_tier(source, &mut meta)?
    };

    let mut words = Vec::new();
    let mut silences = Vec::new();
    for iv in intervals {
        if is_pause(&iv.label) {
            if iv.end > iv.start {
                silences.push((iv.start, iv.end));
            }
            continue;
        }
        let word = WordInterval::new(iv.label.trim(), iv.start, iv.end).map_err(|e| Error::Parse {
            line: Some(iv.line),
            field: "interval".into(),
            message: e.to_string(),
        })?;
        words.push(word);
    }

    let missing = |field: &str| Error::Parse {
        line: None,
        field: field.into(),
        message: "not given in the document or by the caller".into(),
    };
    let id = meta.id.ok_or_else(|| missing("id"))?;
    let speaker = meta.speaker.ok_or_else(|| missing("speaker"))?;
    let emotion = Emotion::new(meta.emotion.ok_or_else(|| missing("emotion"))?)?;
    AlignedUtterance::new(id, speaker, emotion, words, silences)
}

fn parse_time(token: &str, line: usize, field: &str) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line: Some(line),
        field: field.into(),
        message: format!("expected a number, found {token:?}"),
    })
}

fn parse_plain_tier(source: &str, meta: &mut AlignmentMeta) -> Result<Vec<RawInterval>> {
    let mut current_tier: Option<String> = None;
    let mut found_words_tier = false;
    let mut out = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                let value = Some(value.trim().to_string());
                match key.trim() {
                    "id" => meta.id = value,
                    "speaker" => meta.speaker = value,
                    "emotion" => meta.emotion = value,
                    _ => {}
                }
            }
            continue;
        }
        if let Some(name) = line.strip_prefix("tier") {
            let name = name.trim().trim_matches('"').to_string();
            found_words_tier |= name == "words";
            current_tier = Some(name);
            continue;
        }
        if current_tier.as_deref() != Some("words") {
            continue;
        }
        let mut parts = line.splitn(3, char::is_whitespace);
        let xmin = parts.next().unwrap_or_default();
        let xmax = parts.next().ok_or_else(|| Error::Parse {
            line: Some(line_no),
            field: "xmax".into(),
            message: "expected `xmin xmax label`".into(),
        })?;
        out.push(RawInterval {
            line: line_no,
            start: parse_time(xmin, line_no, "xmin")?,
            end: parse_time(xmax, line_no, "xmax")?,
            label: parts.next().unwrap_or("").trim().trim_matches('"').to_string(),
        });
    }
    if !found_words_tier {
        return Err(Error::Parse {
            line: None,
            field: "tier".into(),
            message: "no tier named \"words\"".into(),
        });
    }
    Ok(out)
}

/// Minimal reader for Praat's long text TextGrid format: only the interval
/// tier named "words" is extracted.
fn parse_praat_long(source: &str) -> Result<Vec<RawInterval>> {
    let mut in_words = false;
    let mut found = false;
    let mut out = Vec::new();
    let mut pending: (Option<f64>, Option<f64>, usize) = (None, None, 0);

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with("item [") {
            in_words = false;
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            if line.starts_with("intervals [") {
                pending = (None, None, line_no);
            }
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "name" => {
                in_words = value.trim_matches('"') == "words";
                found |= in_words;
            }
            "xmin" if in_words && pending.2 > 0 => {
                pending.0 = Some(parse_time(value, line_no, "xmin")?)
            }
            "xmax" if in_words && pending.2 > 0 => {
                pending.1 = Some(parse_time(value, line_no, "xmax")?)
            }
            "text" if in_words && pending.2 > 0 => {
                let (Some(start), Some(end)) = (pending.0, pending.1) else {
                    return Err(Error::Parse {
                        line: Some(line_no),
                        field: "text".into(),
                        message: "interval text before xmin/xmax".into(),
                    });
                };
                let label = value
                    .strip_prefix('"')
                    .and_then(|v| v.strip_suffix('"'))
                    .unwrap_or(value)
                    .replace("\"\"", "\"");
                out.push(RawInterval {
                    line: pending.2,
                    start,
                    end,
                    label,
                });
                pending = (None, None, 0);
            }
            _ => {}
        }
    }
    if !found {
        return Err(Error::Parse {
            line: None,
            field: "tier".into(),
            message: "no tier named \"words\"".into(),
        });
    }
    Ok(out)
}
