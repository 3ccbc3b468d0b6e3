use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{example_gradients, prepare, Example};
use crate::corpus::Corpus;
use crate::model::{EmoPPModel, Gradients};
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
}

fn batch_loss(model: &EmoPPModel, examples: &[Example], alpha: f64) -> Result<f64> {
    let scale = 1.0 / examples.len() as f64;
    let mut total = 0.0;
    for ex in examples {
        total += example_gradients(model, ex, alpha, [1.0, 1.0], scale, None)?.0.total * scale;
    }
    Ok(total)
}

/// Analytic gradient of the batch-mean loss, evaluation mode (no dropout).
pub fn batch_gradients(model: &EmoPPModel, batch: &Corpus, alpha: f64) -> Result<Gradients> {
    let examples = prepare(model, batch)?;
    let scale = 1.0 / examples.len().max(1) as f64;
    let mut grads = Gradients::zeros_like(model.params());
    for ex in &examples {
        grads.add_assign(&example_gradients(model, ex, alpha, [1.0, 1.0], scale, None)?.2);
    }
    Ok(grads)
}

/// Compares analytic gradients of the joint loss with central differences
/// on up to `samples_per_tensor` entries of every trainable tensor.
/// Relative error is `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn check_gradients(
    model: &mut EmoPPModel,
    batch: &Corpus,
    alpha: f64,
    epsilon: f64,
    samples_per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let analytic = batch_gradients(model, batch, alpha)?;
    let examples = prepare(model, batch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = model.params().ids().collect();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: None,
    };
    for id in ids {
        if model.params().is_frozen(id) {
            continue;
        }
        let size = model.params().get(id).len();
        let picks: Vec<usize> = if size <= samples_per_tensor {
            (0..size).collect()
        } else {
            (0..samples_per_tensor).map(|_| rng.gen_range(0..size)).collect()
        };
        for flat in picks {
            let original = model.params().get(id).as_slice().expect("contiguous")[flat];
            let mut loss_at = |value: f64| -> Result<f64> {
                model.params_mut().get_mut(id).as_slice_mut().expect("contiguous")[flat] = value;
                batch_loss(model, &examples, alpha)
            };
            let plus = loss_at(original + epsilon)?;
            let minus = loss_at(original - epsilon)?;
            model.params_mut().get_mut(id).as_slice_mut().expect("contiguous")[flat] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.get(id).as_slice().expect("contiguous")[flat];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
            report.checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = Some((model.params().name(id).to_string(), flat));
            }
        }
    }
    Ok(report)
}
