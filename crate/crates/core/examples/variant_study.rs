//! Trains the four variants on a synthetic corpus and prints test scores.
//!
//! ```text
//! cargo run --release -p emopp --example variant_study -- [coupled|uncoupled] [utterances] [epochs] [lr] [seeds]
//! ```

use std::time::Instant;

use emopp::analysis::ReportFormat;
use emopp::corpus::{generate_synthetic_corpus, split_corpus, SplitRatios, SyntheticConfig};
use emopp::evaluation::{compare_systems, render_comparison, SystemSpec};
use emopp::model::{ModelConfig, Variant};
use emopp::training::TrainConfig;

fn main() -> emopp::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let kind = arg(0, "coupled");
    let n: usize = arg(1, "2000").parse().expect("utterances");
    let epochs: usize = arg(2, "8").parse().expect("epochs");
    let lr: f64 = arg(3, "3e-3").parse().expect("lr");
    let seeds: u64 = arg(4, "3").parse().expect("seeds");

    let synth = match kind.as_str() {
        "uncoupled" => SyntheticConfig::uncoupled(n),
        _ => SyntheticConfig::coupled(n),
    };
    let variants = [
        Variant::Emopp,
        Variant::EncoderOnly,
        Variant::RecurrentOnly,
        Variant::EmoppLinearEmotion,
    ];
    let mut means = vec![0.0; variants.len()];
    for seed in 0..seeds {
        let started = Instant::now();
        let corpus = generate_synthetic_corpus(&synth, seed)?;
        let splits = split_corpus(&corpus, SplitRatios::default(), seed)?;
        let systems: Vec<SystemSpec> = variants
            .iter()
            .map(|&v| SystemSpec {
                name: v.as_str().to_string(),
                model: ModelConfig::default().with_variant(v),
                train: TrainConfig {
                    learning_rate: lr,
                    epochs,
                    seed,
                    ..TrainConfig::default()
                },
            })
            .collect();
        let table = compare_systems(&splits, &systems, None, true)?;
        println!("seed {seed} ({:.1}s)", started.elapsed().as_secs_f64());
        print!("{}", render_comparison(&table, ReportFormat::TextTable)?);
        for (m, row) in means.iter_mut().zip(&table.rows) {
            *m += row.report().and_then(|r| r.overall.f1).unwrap_or(0.0) / seeds as f64;
        }
    }
    println!("mean F1 over {seeds} seeds");
    for (v, m) in variants.iter().zip(&means) {
        println!("{:<22} {m:.2}", v.as_str());
    }
    Ok(())
}
