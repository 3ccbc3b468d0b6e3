//! Cross-emotion similarity of phrase-break sequences.
//!
//! For parallel texts (the same sentence from the same speaker in several
//! emotions), the simple matching coefficient between two break sequences is
//! the fraction of word positions where they agree. Averaging it over all
//! texts and speakers gives one value per emotion pair.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{BreakSequence, Corpus, Emotion};
use crate::{Error, Result};

/// Fraction of positions at which `a` and `b` agree.
pub fn smc(a: &BreakSequence, b: &BreakSequence) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
            context: Some("smc".into()),
        });
    }
    let agree = a
        .labels()
        .iter()
        .zip(b.labels())
        .filter(|(x, y)| x == y)
        .count();
    Ok(agree as f64 / a.len() as f64)
}

/// `(speaker, text)` key of a parallel group.
pub type GroupKey = (String, String);

/// Break sequences of parallel texts, indexed by (speaker, text, emotion).
#[derive(Debug, Clone, Default)]
pub struct EmotionBreakTable {
    groups: BTreeMap<GroupKey, BTreeMap<Emotion, BreakSequence>>,
    inventory: Vec<Emotion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    #[default]
    TextSpeaker,
    /// Pool speakers; each (text, emotion) may then occur only once.
    Text,
}

impl EmotionBreakTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one sequence. A second entry for the same (speaker, text, emotion)
    /// is an error: silently keeping either one would make the matrix depend
    /// on insertion order.
    pub fn insert(
        &mut self,
        speaker: impl Into<String>,
        text: impl Into<String>,
        emotion: Emotion,
        breaks: BreakSequence,
    ) -> Result<()> {
        let key = (speaker.into(), text.into());
        let group = self.groups.entry(key.clone()).or_default();
        if group.contains_key(&emotion) {
            return Err(Error::validation(format!(
                "duplicate entry for speaker {:?}, text {:?}, emotion {emotion}",
                key.0, key.1
            )));
        }
        if !self.inventory.contains(&emotion) {
            self.inventory.push(emotion.clone());
        }
        group.insert(emotion, breaks);
        Ok(())
    }

    /// Builds the table from every utterance that carries gold breaks.
    pub fn from_corpus(corpus: &Corpus, group_by: GroupBy) -> Result<Self> {
        let mut table = Self::new();
        for u in &corpus.utterances {
            let Some(breaks) = &u.breaks else { continue };
            let speaker = match group_by {
                GroupBy::TextSpeaker => u.speaker.clone(),
                GroupBy::Text => String::new(),
            };
            table.insert(speaker, u.words.join(" "), u.emotion.clone(), breaks.clone())?;
        }
        table.inventory = corpus
            .emotion_inventory
            .iter()
            .filter(|e| table.inventory.contains(e))
            .cloned()
            .collect();
        Ok(table)
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Emotions present, canonical order first.
    pub fn emotions(&self) -> Vec<Emotion> {
        crate::corpus::emotion_inventory(self.inventory.iter())
    }

    pub fn groups(&self) -> impl Iterator<Item = (&GroupKey, &BTreeMap<Emotion, BreakSequence>)> {
        self.groups.iter()
    }

    /// Number of groups holding at least two emotions.
    pub fn parallel_groups(&self) -> usize {
        self.groups.values().filter(|g| g.len() >= 2).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcMatrix {
    pub labels: Vec<Emotion>,
    /// `None` where no (text, speaker) group holds both emotions.
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
    /// Groups skipped because their sequences differ in length.
    pub skipped_groups: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SmcOptions {
    /// Skip (with a warning) groups whose sequences differ in length instead
    /// of failing.
    pub skip_mismatched: bool,
}

/// Mean pairwise SMC per emotion pair over every (speaker, text) group where
/// both emotions are present. Dividing by the number of contributing groups
/// coincides with the N·M normalisation when the table is complete.
pub fn smc_matrix(table: &EmotionBreakTable, options: SmcOptions) -> Result<SmcMatrix> {
    if table.is_empty() {
        return Err(Error::validation("empty emotion break table"));
    }
    let labels = table.emotions();
    let n = labels.len();
    let mut sums = vec![vec![0.0f64; n]; n];
    let mut counts = vec![vec![0usize; n]; n];
    let mut skipped_groups = 0;

    'groups: for ((speaker, text), group) in &table.groups {
        let mut lengths = group.values().map(BreakSequence::len);
        let first = lengths.next().unwrap_or(0);
        if let Some(other) = lengths.find(|&l| l != first) {
            if options.skip_mismatched {
                warn!("skipping group (speaker {speaker:?}, text {text:?}): lengths {first} vs {other}");
                skipped_groups += 1;
                continue 'groups;
            }
            return Err(Error::LengthMismatch {
                left: first,
                right: other,
                context: Some(format!("speaker {speaker:?}, text {text:?}")),
            });
        }
        let present: Vec<(usize, &BreakSequence)> = labels
            .iter()
            .enumerate()
            .filter_map(|(i, e)| group.get(e).map(|b| (i, b)))
            .collect();
        for &(i, a) in &present {
            for &(j, b) in &present {
                if j < i {
                    continue;
                }
                let s = smc(a, b)?;
                sums[i][j] += s;
                counts[i][j] += 1;
            }
        }
    }

    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            if counts[i][j] > 0 {
                let v = sums[i][j] / counts[i][j] as f64;
                values[i][j] = Some(v);
                values[j][i] = Some(v);
                counts[j][i] = counts[i][j];
            }
        }
    }
    Ok(SmcMatrix {
        labels,
        values,
        counts,
        skipped_groups,
    })
}

impl SmcMatrix {
    /// Mean over defined off-diagonal cells.
    pub fn mean_off_diagonal(&self) -> Option<f64> {
        let cells: Vec<f64> = (0..self.labels.len())
            .flat_map(|i| (0..self.labels.len()).filter(move |&j| j != i).map(move |j| (i, j)))
            .filter_map(|(i, j)| self.values[i][j])
            .collect();
        (!cells.is_empty()).then(|| cells.iter().sum::<f64>() / cells.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TextTable,
    Csv,
}

fn cell(matrix: &SmcMatrix, i: usize, j: usize) -> String {
    if j < i {
        "-".to_string()
    } else {
        match matrix.values[i][j] {
            Some(v) => format!("{v:.2}"),
            None => "n/a".to_string(),
        }
    }
}

/// Upper-triangular rendering; the lower triangle is dashed.
pub fn render_smc_report(matrix: &SmcMatrix, format: ReportFormat) -> Result<String> {
    let n = matrix.labels.len();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let header: Vec<&str> = std::iter::once("")
                .chain(matrix.labels.iter().map(Emotion::as_str))
                .collect();
            w.write_record(&header)?;
            for i in 0..n {
                let row: Vec<String> = std::iter::once(matrix.labels[i].to_string())
                    .chain((0..n).map(|j| cell(matrix, i, j)))
                    .collect();
                w.write_record(&row)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::TextTable => {
            let width = matrix
                .labels
                .iter()
                .map(|l| l.as_str().len())
                .max()
                .unwrap_or(0)
                .max(4);
            let mut out = String::new();
            let _ = write!(out, "{:width$}", "");
            for l in &matrix.labels {
                let _ = write!(out, "  {:>width$}", capitalize(l.as_str()));
            }
            out.push('\n');
            for i in 0..n {
                let _ = write!(out, "{:width$}", capitalize(matrix.labels[i].as_str()));
                for j in 0..n {
                    let _ = write!(out, "  {:>width$}", cell(matrix, i, j));
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
