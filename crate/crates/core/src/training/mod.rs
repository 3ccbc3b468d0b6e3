//! Joint optimisation of the emotion head and the break tagger.
//!
//! Each step averages `L = L_emo + alpha * L_pp` over a mini-batch, clips the
//! global gradient norm and applies Adam. Validation break F1 is measured
//! after every epoch and the best epoch's weights are kept.

mod gradcheck;
mod loss;
mod optim;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BreakSequence, Corpus};
use crate::evaluation::evaluate_model;
use crate::model::{EmoPPModel, EncodedText, Gradients, Mat, Tape};
use crate::{Error, Result};

pub use gradcheck::{batch_gradients, check_gradients, GradCheckReport};
pub use loss::{compute_loss, loss_on, LossValues, LossVars};
pub use optim::Adam;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Decays linearly from `learning_rate` towards 0 over all steps.
    LinearDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckpointMetric {
    #[default]
    BreakF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub grad_clip_norm: f64,
    pub seed: u64,
    pub lr_schedule: LrSchedule,
    pub checkpoint_metric: CheckpointMetric,
    /// Inverse-frequency weights on the break cross-entropy.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.7,
            batch_size: 16,
            learning_rate: 1e-5,
            epochs: 10,
            grad_clip_norm: 10.0,
            seed: 0,
            lr_schedule: LrSchedule::Constant,
            checkpoint_metric: CheckpointMetric::BreakF1,
            class_weighting: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("batch_size and epochs must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.grad_clip_norm > 0.0 && self.grad_clip_norm.is_finite()) {
            return Err(Error::config("grad_clip_norm must be positive"));
        }
        Ok(())
    }

    fn lr_at(&self, step: usize, total_steps: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::LinearDecay => {
                self.learning_rate * (1.0 - step as f64 / total_steps.max(1) as f64)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training losses over the epoch's batches.
    pub loss: f64,
    pub emotion_loss: f64,
    pub break_loss: f64,
    pub val_f1: Option<f64>,
    pub val_emotion_accuracy: Option<f64>,
    pub learning_rate: f64,
    /// Largest gradient norm before and after clipping.
    pub max_grad_norm: f64,
    pub max_clipped_norm: f64,
    /// Utterances whose break positions were all masked.
    pub masked_utterances: usize,
}

impl EpochRecord {
    pub fn progress_line(&self) -> String {
        let f1 = self.val_f1.map_or("n/a".to_string(), |f| format!("{f:.2}"));
        format!(
            "epoch {}: L={:.4} L_emo={:.4} L_pp={:.4} valF1={f1}",
            self.epoch, self.loss, self.emotion_loss, self.break_loss
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: String,
    pub config: TrainConfig,
    pub train_utterances: usize,
    pub validation_utterances: usize,
    pub epochs: Vec<EpochRecord>,
    /// 1-based index into `epochs`.
    pub best_epoch: usize,
    pub best_val_f1: Option<f64>,
    pub checkpoint_path: Option<PathBuf>,
}

impl TrainReport {
    pub fn loss_trace(&self) -> Vec<(f64, f64, f64)> {
        self.epochs.iter().map(|e| (e.loss, e.emotion_loss, e.break_loss)).collect()
    }
}

/// One training example with its model input resolved.
pub(crate) struct Example<'a> {
    pub id: &'a str,
    pub input: EncodedText,
    pub emotion: Option<usize>,
    pub breaks: &'a BreakSequence,
}

pub(crate) fn prepare<'a>(model: &EmoPPModel, corpus: &'a Corpus) -> Result<Vec<Example<'a>>> {
    let needs_emotion = model.variant().has_emotion_path();
    corpus
        .utterances
        .iter()
        .map(|u| {
            let breaks = u
                .breaks
                .as_ref()
                .ok_or_else(|| Error::validation(format!("utterance {} has no gold breaks", u.id)))?;
            let input = model.encode_input(u)?;
            if input.spans.len() != breaks.len() {
                return Err(Error::LengthMismatch {
                    left: input.spans.len(),
                    right: breaks.len(),
                    context: Some(format!("utterance {}", u.id)),
                });
            }
            let emotion = if needs_emotion {
                Some(model.emotion_index(&u.emotion)?)
            } else {
                None
            };
            Ok(Example {
                id: &u.id,
                input,
                emotion,
                breaks,
            })
        })
        .collect()
}

/// Per-utterance forward and backward. Gradients are scaled by `scale`.
pub(crate) fn example_gradients(
    model: &EmoPPModel,
    ex: &Example,
    alpha: f64,
    class_weights: [f64; 2],
    scale: f64,
    dropout_seed: Option<u64>,
) -> Result<(LossValues, bool, Gradients)> {
    let mut tape = Tape::new(model.params());
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let out = model.graph(&mut tape, &ex.input, ex.emotion, rng.as_mut())?;
    let vars = loss_on(
        &mut tape,
        out.emotion_logits,
        ex.emotion,
        out.break_logits,
        ex.breaks,
        alpha,
        class_weights,
    )
    .map_err(|e| Error::validation(format!("utterance {}: {e}", ex.id)))?;
    let mut grads = Gradients::zeros_like(model.params());
    tape.backward(vars.total, scale, &mut grads);
    Ok((vars.values(&tape), vars.fully_masked, grads))
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over the combined words
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn class_weights(examples: &[Example], enabled: bool) -> [f64; 2] {
    if !enabled {
        return [1.0, 1.0];
    }
    let mut counts = [0usize; 2];
    for ex in examples {
        for &b in ex.breaks.unmasked() {
            counts[b as usize] += 1;
        }
    }
    let total = (counts[0] + counts[1]) as f64;
    counts.map(|c| if c == 0 { 1.0 } else { total / (2.0 * c as f64) })
}

/// Trains without progress output. See [`train_with_progress`].
pub fn train(
    model: &mut EmoPPModel,
    train_set: &Corpus,
    validation: &Corpus,
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainReport> {
    train_with_progress(model, train_set, validation, config, checkpoint_dir, &mut |_| {})
}

/// Trains `model` in place and leaves it holding the best epoch's weights.
/// With a `checkpoint_dir`, the best model and `report.json` are written
/// there. `progress` is called after every epoch.
pub fn train_with_progress(
    model: &mut EmoPPModel,
    train_set: &Corpus,
    validation: &Corpus,
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptySplit("train".into()));
    }
    if validation.is_empty() {
        return Err(Error::EmptySplit("validation".into()));
    }
    let examples = prepare(model, train_set)?;
    // fail before training on malformed validation data
    prepare(model, validation)?;
    let weights = class_weights(&examples, config.class_weighting);

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffler = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model.params());
    let batches_per_epoch = examples.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let dropout = model.config().dropout_rate > 0.0;

    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Vec<Mat>)> = None;
    let mut best_f1 = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffler);
        let mut sums = LossValues::default();
        let (mut max_norm, mut max_clipped, mut masked, mut lr) = (0.0f64, 0.0f64, 0, 0.0);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let scale = 1.0 / chunk.len() as f64;
            let model_ref: &EmoPPModel = model;
            let results: Vec<Result<(LossValues, bool, Gradients)>> = chunk
                .par_iter()
                .map(|&i| {
                    let seed = dropout.then(|| mix(config.seed, epoch as u64, i as u64));
                    example_gradients(model_ref, &examples[i], config.alpha, weights, scale, seed)
                })
                .collect();
            let mut grads = Gradients::zeros_like(model.params());
            let mut batch = LossValues::default();
            for r in results {
                let (v, fully_masked, g) = r?;
                grads.add_assign(&g);
                batch.total += v.total * scale;
                batch.emotion += v.emotion * scale;
                batch.breaks += v.breaks * scale;
                masked += usize::from(fully_masked);
            }
            if !batch.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b + 1,
                    l_emo: batch.emotion,
                    l_pp: batch.breaks,
                });
            }
            let norm = grads.clip_global_norm(config.grad_clip_norm);
            max_norm = max_norm.max(norm);
            max_clipped = max_clipped.max(grads.global_norm());
            lr = config.lr_at(adam.steps() as usize, total_steps);
            adam.step(model.params_mut(), &grads, lr);
            sums.total += batch.total;
            sums.emotion += batch.emotion;
            sums.breaks += batch.breaks;
        }
        if masked > 0 {
            log::warn!("epoch {epoch}: {masked} utterances had every break position masked");
        }
        let (report, _) = evaluate_model(model.variant().as_str(), model, validation)?;
        let n = batches_per_epoch as f64;
        let record = EpochRecord {
            epoch,
            loss: sums.total / n,
            emotion_loss: sums.emotion / n,
            break_loss: sums.breaks / n,
            val_f1: report.overall.f1,
            val_emotion_accuracy: report.emotion_accuracy,
            learning_rate: lr,
            max_grad_norm: max_norm,
            max_clipped_norm: max_clipped,
            masked_utterances: masked,
        };
        progress(&record);
        let score = record.val_f1.unwrap_or(-1.0);
        if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
            if let Some(dir) = checkpoint_dir {
                model.save(dir)?;
            }
            best = Some((epoch, score, model.params().values().to_vec()));
            best_f1 = record.val_f1;
        }
        records.push(record);
    }

    let (best_epoch, _, values) = best.expect("at least one epoch");
    model
        .params_mut()
        .load_values(values)
        .map_err(Error::Validation)?;
    let report = TrainReport {
        variant: model.variant().as_str().to_string(),
        config: config.clone(),
        train_utterances: train_set.len(),
        validation_utterances: validation.len(),
        epochs: records,
        best_epoch,
        best_val_f1: best_f1,
        checkpoint_path: checkpoint_dir.map(Path::to_path_buf),
    };
    if let Some(dir) = checkpoint_dir {
        fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}
