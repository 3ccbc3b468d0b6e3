//! Checkpoint directory layout:
//!
//! * `config.json`: every [`ModelConfig`] field, including the emotion inventory
//! * `tokenizer.json`
//! * `weights.json`: tensor names and shapes, in blob order
//! * `weights.bin`: little-endian `f64` values, row-major, tensors concatenated

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmoPPModel, EncoderKind, Mat, ModelConfig, Tokenizer};
use crate::{Error, Result};

const CONFIG: &str = "config.json";
const TOKENIZER: &str = "tokenizer.json";
const MANIFEST: &str = "weights.json";
const BLOB: &str = "weights.bin";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
}

fn err(path: &Path, message: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub(super) fn save(model: &EmoPPModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG), serde_json::to_string_pretty(&model.config)?)?;
    fs::write(dir.join(TOKENIZER), serde_json::to_string(&model.tokenizer)?)?;
    let params = &model.params;
    let manifest: Vec<TensorEntry> = params
        .ids()
        .map(|id| {
            let (r, c) = params.get(id).dim();
            TensorEntry {
                name: params.name(id).to_string(),
                shape: [r, c],
            }
        })
        .collect();
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    let mut blob = Vec::with_capacity(params.num_scalars() * 8);
    for value in params.values() {
        for x in value.iter() {
            blob.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(dir.join(BLOB), blob)?;
    Ok(())
}

/// Reads the stored tensors by name.
fn read_tensors(dir: &Path) -> Result<Vec<(String, Mat)>> {
    let manifest: Vec<TensorEntry> = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)
        .map_err(|e| err(dir, format!("{MANIFEST}: {e}")))?;
    let blob = fs::read(dir.join(BLOB))?;
    let expected: usize = manifest.iter().map(|t| t.shape[0] * t.shape[1] * 8).sum();
    if blob.len() != expected {
        return Err(err(
            dir,
            format!("{BLOB} holds {} bytes, manifest describes {expected}", blob.len()),
        ));
    }
    let mut offset = 0;
    let mut out = Vec::with_capacity(manifest.len());
    for t in manifest {
        let n = t.shape[0] * t.shape[1];
        let values: Vec<f64> = blob[offset..offset + n * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        offset += n * 8;
        let m = Mat::from_shape_vec((t.shape[0], t.shape[1]), values)
            .map_err(|e| err(dir, format!("{}: {e}", t.name)))?;
        out.push((t.name, m));
    }
    Ok(out)
}

pub(super) fn load(dir: &Path) -> Result<EmoPPModel> {
    let config: ModelConfig = serde_json::from_slice(&fs::read(dir.join(CONFIG))?)
        .map_err(|e| err(dir, format!("{CONFIG}: {e}")))?;
    let mut tokenizer: Tokenizer = serde_json::from_slice(&fs::read(dir.join(TOKENIZER))?)
        .map_err(|e| err(dir, format!("{TOKENIZER}: {e}")))?;
    tokenizer.rebuild_index();
    let mut model = EmoPPModel::new(config, tokenizer, 0).map_err(|e| err(dir, e.to_string()))?;
    let tensors = read_tensors(dir)?;
    let params = &model.params;
    if tensors.len() != params.len() {
        return Err(err(
            dir,
            format!(
                "config implies {} tensors, checkpoint holds {}",
                params.len(),
                tensors.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(tensors.len());
    for (id, (name, value)) in params.ids().zip(tensors) {
        if params.name(id) != name {
            return Err(err(
                dir,
                format!("expected tensor {}, found {name}", params.name(id)),
            ));
        }
        values.push(value);
    }
    model
        .params
        .load_values(values)
        .map_err(|m| err(dir, format!("config and weights disagree: {m}")))?;
    Ok(model)
}

/// Builds a model whose tokenizer and encoder-side tensors come from a saved
/// checkpoint. Tensors absent from the assets keep their fresh initialisation.
pub(super) fn from_pretrained(config: ModelConfig, assets: &Path, seed: u64) -> Result<EmoPPModel> {
    debug_assert_eq!(config.encoder_kind, EncoderKind::PretrainedLarge);
    let tok_path = assets.join(TOKENIZER);
    if !tok_path.exists() {
        return Err(err(assets, "tokenizer assets not found"));
    }
    let mut tokenizer: Tokenizer = serde_json::from_slice(&fs::read(&tok_path)?)
        .map_err(|e| err(assets, format!("{TOKENIZER}: {e}")))?;
    tokenizer.rebuild_index();
    tokenizer.max_pieces_per_word = config.max_pieces_per_word;
    tokenizer.max_tokens = config.max_tokens;
    let mut model = EmoPPModel::new(config, tokenizer, seed)?;
    let mut loaded = 0;
    for (name, value) in read_tensors(assets)? {
        let shared = name.starts_with("encoder.")
            || name.starts_with("emotion.embedding")
            || name.starts_with("emotion.encoder.");
        if !shared {
            continue;
        }
        if let Some(slot) = model.params.by_name_mut(&name) {
            if slot.dim() != value.dim() {
                return Err(err(
                    assets,
                    format!("{name}: asset shape {:?} vs model {:?}", value.dim(), slot.dim()),
                ));
            }
            *slot = value;
            loaded += 1;
        }
    }
    if loaded == 0 {
        return Err(err(assets, "no encoder tensors matched the model"));
    }
    Ok(model)
}
