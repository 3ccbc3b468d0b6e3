use serde::{Deserialize, Serialize};

use crate::corpus::BreakSequence;
use crate::model::{Mat, Tape, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossValues {
    pub total: f64,
    pub emotion: f64,
    pub breaks: f64,
}

impl LossValues {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.emotion.is_finite() && self.breaks.is_finite()
    }
}

/// Loss nodes of one utterance.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub total: Var,
    pub emotion: Option<Var>,
    pub breaks: Var,
    /// True when every break position was masked (one-word utterance).
    pub fully_masked: bool,
}

impl LossVars {
    pub fn values(&self, tape: &Tape) -> LossValues {
        LossValues {
            total: tape.scalar(self.total),
            emotion: self.emotion.map_or(0.0, |v| tape.scalar(v)),
            breaks: tape.scalar(self.breaks),
        }
    }
}

/// Builds `L = L_emo + alpha * L_pp` on the tape. `class_weights` scales the
/// break cross-entropy per gold class; the final word never contributes.
pub fn loss_on(
    tape: &mut Tape,
    emotion_logits: Option<Var>,
    gold_emotion: Option<usize>,
    break_logits: Var,
    gold_breaks: &BreakSequence,
    alpha: f64,
    class_weights: [f64; 2],
) -> Result<LossVars> {
    let n = tape.value(break_logits).nrows();
    if n != gold_breaks.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: gold_breaks.len(),
            context: Some("break logits vs gold breaks".into()),
        });
    }
    let targets: Vec<usize> = gold_breaks.labels().iter().map(|&b| b as usize).collect();
    let weights: Vec<f64> = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| if i + 1 == n { 0.0 } else { class_weights[t] })
        .collect();
    let fully_masked = n <= 1;
    let breaks = tape.cross_entropy(break_logits, targets, weights);
    let weighted = tape.scale(breaks, alpha);
    let (total, emotion) = match emotion_logits {
        Some(logits) => {
            let classes = tape.value(logits).ncols();
            let gold = gold_emotion
                .ok_or_else(|| Error::validation("emotion head present but no gold emotion"))?;
            if gold >= classes {
                return Err(Error::validation(format!(
                    "gold emotion index {gold} outside {classes} classes"
                )));
            }
            let emo = tape.cross_entropy(logits, vec![gold], vec![1.0]);
            (tape.add(emo, weighted), Some(emo))
        }
        None => (weighted, None),
    };
    Ok(LossVars {
        total,
        emotion,
        breaks,
        fully_masked,
    })
}

/// Joint loss from raw logits: emotion logits (one row per class score) and
/// per-word break logits (n × 2). Without emotion logits `L_emo` is 0.
pub fn compute_loss(
    emotion_logits: Option<&[f64]>,
    gold_emotion: Option<usize>,
    break_logits: &Mat,
    gold_breaks: &BreakSequence,
    alpha: f64,
) -> Result<LossValues> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if break_logits.ncols() != 2 {
        return Err(Error::validation(format!(
            "break logits must have 2 columns, got {}",
            break_logits.ncols()
        )));
    }
    let params = crate::model::ParamStore::new();
    let mut tape = Tape::new(&params);
    let emo = emotion_logits.map(|l| tape.input(Mat::from_shape_vec((1, l.len()), l.to_vec()).unwrap()));
    let brk = tape.input(break_logits.clone());
    let vars = loss_on(&mut tape, emo, gold_emotion, brk, gold_breaks, alpha, [1.0, 1.0])?;
    Ok(vars.values(&tape))
}
