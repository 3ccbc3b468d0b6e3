use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_model, fmt_percent, EvalReport};
use crate::analysis::ReportFormat;
use crate::corpus::{save_corpus, DataSplits};
use crate::model::{EmoPPModel, ModelConfig};
use crate::training::{train, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOutcome {
    Scored(EvalReport),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub variant: String,
    pub outcome: RowOutcome,
}

impl ComparisonRow {
    pub fn report(&self) -> Option<&EvalReport> {
        match &self.outcome {
            RowOutcome::Scored(r) => Some(r),
            RowOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

fn run_system(spec: &SystemSpec, splits: &DataSplits, out_dir: Option<&Path>) -> Result<EvalReport> {
    let mut model = EmoPPModel::for_corpus(spec.model.clone(), &splits.train, spec.train.seed)?;
    let dir = out_dir.map(|d| d.join(&spec.name));
    let ckpt = dir.as_ref().map(|d| d.join("checkpoint"));
    train(&mut model, &splits.train, &splits.validation, &spec.train, ckpt.as_deref())?;
    let (report, predictions) = evaluate_model(&spec.name, &model, &splits.test)?;
    if let Some(d) = &dir {
        save_corpus(&predictions, d.join("predictions.jsonl"))?;
        fs::write(d.join("eval.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// Trains and tests every system on the shared splits. Systems run in
/// parallel when `parallel` is set; rows keep the given order and a failing
/// system yields a failed row. With `out_dir`, each system gets
/// `<out_dir>/<name>/` holding its checkpoint, test predictions and scores.
pub fn compare_systems(
    splits: &DataSplits,
    systems: &[SystemSpec],
    out_dir: Option<&Path>,
    parallel: bool,
) -> Result<ComparisonTable> {
    if systems.is_empty() {
        return Err(Error::config("no systems to compare"));
    }
    let mut seen = std::collections::HashSet::new();
    for s in systems {
        if s.name.is_empty() || s.name.contains(['/', '\\']) || !seen.insert(&s.name) {
            return Err(Error::config(format!("invalid or duplicate system name {:?}", s.name)));
        }
    }
    if splits.test.is_empty() {
        return Err(Error::EmptySplit("test".into()));
    }
    let run = |spec: &SystemSpec| {
        let outcome = match run_system(spec, splits, out_dir) {
            Ok(r) => RowOutcome::Scored(r),
            Err(e) => {
                log::error!("system {} failed: {e}", spec.name);
                RowOutcome::Failed(e.to_string())
            }
        };
        ComparisonRow {
            name: spec.name.clone(),
            variant: spec.model.variant.as_str().to_string(),
            outcome,
        }
    };
    let rows = if parallel {
        systems.par_iter().map(run).collect()
    } else {
        systems.iter().map(run).collect()
    };
    Ok(ComparisonTable { rows })
}

/// Text table (`Model  P  R  F`) or CSV. Failed rows show `failed`.
pub fn render_comparison(table: &ComparisonTable, format: ReportFormat) -> Result<String> {
    let cells: Vec<[String; 4]> = table
        .rows
        .iter()
        .map(|row| match &row.outcome {
            RowOutcome::Scored(r) => [
                row.name.clone(),
                fmt_percent(r.overall.precision),
                fmt_percent(r.overall.recall),
                fmt_percent(r.overall.f1),
            ],
            RowOutcome::Failed(_) => [row.name.clone(), "failed".into(), "failed".into(), "failed".into()],
        })
        .collect();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["system", "precision", "recall", "f1"])?;
            for c in &cells {
                w.write_record(c)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::TextTable => {
            let width = cells.iter().map(|c| c[0].len()).max().unwrap_or(0).max(5);
            let mut out = format!("{:<width$}  {:>7}  {:>7}  {:>7}\n", "Model", "P", "R", "F");
            for c in &cells {
                out.push_str(&format!("{:<width$}  {:>7}  {:>7}  {:>7}\n", c[0], c[1], c[2], c[3]));
            }
            Ok(out)
        }
    }
}
