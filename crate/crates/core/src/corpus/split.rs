use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataSplits {
    pub train: Corpus,
    pub validation: Corpus,
    pub test: Corpus,
}

/// Seeded shuffle followed by a ratio cut. All three splits share the
/// inventory of the source corpus.
pub fn split_corpus(corpus: &Corpus, ratios: SplitRatios, seed: u64) -> Result<DataSplits> {
    let parts = [ratios.train, ratios.validation, ratios.test];
    if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::config("split ratios must be non-negative"));
    }
    let total: f64 = parts.iter().sum();
    if total <= 0.0 {
        return Err(Error::config("split ratios sum to zero"));
    }
    let n = corpus.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_val = ((ratios.validation / total) * n as f64).round() as usize;
    let n_test = ((ratios.test / total) * n as f64).round() as usize;
    let n_val = n_val.min(n);
    let n_test = n_test.min(n - n_val);
    let n_train = n - n_val - n_test;

    let take = |idx: &[usize], split: Split| {
        Corpus {
            utterances: idx.iter().map(|&i| corpus.utterances[i].clone()).collect(),
            emotion_inventory: corpus.emotion_inventory.clone(),
            split,
        }
    };
    // indices are re-sorted so each split keeps file order
    let mut train_idx = order[..n_train].to_vec();
    let mut val_idx = order[n_train..n_train + n_val].to_vec();
    let mut test_idx = order[n_train + n_val..].to_vec();
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(DataSplits {
        train: take(&train_idx, Split::Train),
        validation: take(&val_idx, Split::Validation),
        test: take(&test_idx, Split::Test),
    })
}
