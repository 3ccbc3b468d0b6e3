//! Break-class precision, recall and F1, per-emotion breakdowns, the
//! multi-system comparison harness, and break annotation of text.

mod annotate;
mod compare;

use serde::{Deserialize, Serialize};

use crate::corpus::{BreakSequence, Corpus, Emotion};
use crate::model::EmoPPModel;
use crate::{Error, Result};

pub use annotate::{annotate_breaks, strip_markers, DEFAULT_MARKER};
pub use compare::{
    compare_systems, render_comparison, ComparisonRow, ComparisonTable, RowOutcome, SystemSpec,
};

/// Confusion counts over unmasked positions (break = positive class) and the
/// derived percentages. A metric is `None` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BreakScores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl BreakScores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = (tp + fp > 0).then(|| 100.0 * tp as f64 / (tp + fp) as f64);
        let recall = (tp + fn_ > 0).then(|| 100.0 * tp as f64 / (tp + fn_) as f64);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        BreakScores {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn merge(&self, other: &BreakScores) -> BreakScores {
        BreakScores::from_counts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn_ + other.fn_,
            self.tn + other.tn,
        )
    }
}

/// Confusion counts of one utterance, final position excluded.
pub fn confusion(predicted: &BreakSequence, gold: &BreakSequence) -> Result<BreakScores> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
            context: None,
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &g) in predicted.unmasked().iter().zip(gold.unmasked()) {
        match (p, g) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    Ok(BreakScores::from_counts(tp, fp, fn_, tn))
}

/// Micro-averaged break-class scores over aligned prediction/gold lists.
pub fn score_breaks(predicted: &[BreakSequence], gold: &[BreakSequence]) -> Result<BreakScores> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
            context: Some("number of predicted vs gold utterances".into()),
        });
    }
    let mut total = BreakScores::default();
    for (k, (p, g)) in predicted.iter().zip(gold).enumerate() {
        let c = confusion(p, g).map_err(|_| Error::LengthMismatch {
            left: p.len(),
            right: g.len(),
            context: Some(format!("utterance #{k}")),
        })?;
        total = total.merge(&c);
    }
    Ok(BreakScores::from_counts(total.tp, total.fp, total.fn_, total.tn))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionScores {
    pub emotion: Emotion,
    pub utterances: usize,
    pub scores: BreakScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub utterances: usize,
    pub overall: BreakScores,
    pub per_emotion: Vec<EmotionScores>,
    /// Percent of utterances whose predicted emotion matches the gold label.
    pub emotion_accuracy: Option<f64>,
}

/// Scores a corpus of predictions (the `breaks` field) against gold.
pub fn score_corpus(system: &str, predicted: &Corpus, gold: &Corpus) -> Result<EvalReport> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
            context: Some("predicted vs gold utterance count".into()),
        });
    }
    let mut items = Vec::with_capacity(gold.len());
    for (p, g) in predicted.utterances.iter().zip(&gold.utterances) {
        if p.id != g.id {
            return Err(Error::validation(format!("utterance order differs: {} vs {}", p.id, g.id)));
        }
        let (Some(pb), Some(gb)) = (&p.breaks, &g.breaks) else {
            return Err(Error::validation(format!("utterance {} lacks breaks", g.id)));
        };
        items.push((g.id.as_str(), &g.emotion, pb.clone(), gb, None));
    }
    build_report(system, &gold.emotion_inventory, items)
}

type Item<'a> = (&'a str, &'a Emotion, BreakSequence, &'a BreakSequence, Option<bool>);

fn build_report(system: &str, inventory: &[Emotion], items: Vec<Item<'_>>) -> Result<EvalReport> {
    let mut overall = BreakScores::default();
    let mut per: Vec<(usize, BreakScores)> = vec![(0, BreakScores::default()); inventory.len()];
    let (mut emo_total, mut emo_correct) = (0, 0);
    for (id, emotion, pred, gold, emo_ok) in &items {
        let c = confusion(pred, gold).map_err(|_| Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
            context: Some(format!("utterance {id}")),
        })?;
        overall = overall.merge(&c);
        if let Some(k) = inventory.iter().position(|e| e == *emotion) {
            per[k].0 += 1;
            per[k].1 = per[k].1.merge(&c);
        }
        if let Some(ok) = emo_ok {
            emo_total += 1;
            emo_correct += usize::from(*ok);
        }
    }
    Ok(EvalReport {
        system: system.to_string(),
        utterances: items.len(),
        overall,
        per_emotion: inventory
            .iter()
            .zip(per)
            .filter(|(_, (n, _))| *n > 0)
            .map(|(e, (n, s))| EmotionScores {
                emotion: e.clone(),
                utterances: n,
                scores: s,
            })
            .collect(),
        emotion_accuracy: (emo_total > 0).then(|| 100.0 * emo_correct as f64 / emo_total as f64),
    })
}

/// Runs the model over every labeled utterance of `corpus` (evaluation mode,
/// no gold emotion) and scores it. Returns the report and a copy of the
/// corpus whose `breaks` hold the predictions.
pub fn evaluate_model(system: &str, model: &EmoPPModel, corpus: &Corpus) -> Result<(EvalReport, Corpus)> {
    let mut predicted = corpus.clone();
    let mut items = Vec::with_capacity(corpus.len());
    for (u, out) in corpus.utterances.iter().zip(predicted.utterances.iter_mut()) {
        let Some(gold) = &u.breaks else {
            return Err(Error::validation(format!("utterance {} has no gold breaks", u.id)));
        };
        let (emotion, breaks) = model.forward(u, None)?;
        let emo_ok = emotion.map(|e| e.label == u.emotion);
        out.breaks = Some(breaks.labels.clone());
        items.push((u.id.as_str(), &u.emotion, breaks.labels, gold, emo_ok));
    }
    let report = build_report(system, &corpus.emotion_inventory, items)?;
    Ok((report, predicted))
}

/// `"78.43"`, or `"n/a"` for an absent metric.
pub fn fmt_percent(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into())
}
