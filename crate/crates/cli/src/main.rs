mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use emopp::analysis::{render_smc_report, smc_matrix, EmotionBreakTable, GroupBy, ReportFormat, SmcOptions};
use emopp::corpus::{
    derive_break_labels, generate_synthetic_corpus, load_corpus, parse_alignment, save_corpus, split_corpus,
    AlignmentMeta, Corpus, Split, SplitRatios, SyntheticConfig, Utterance,
};
use emopp::evaluation::{
    annotate_breaks, compare_systems, evaluate_model, render_comparison, ComparisonRow, ComparisonTable, RowOutcome,
    SystemSpec, DEFAULT_MARKER,
};
use emopp::model::{EmoPPModel, Variant};
use emopp::training::train_with_progress;
use serde_json::json;

use config::{CliConfig, Source};

#[derive(Parser)]
#[command(name = "emopp", version, about = "Emotion-aware prosodic phrase-break prediction")]
struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::TextTable,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupKey {
    #[value(name = "text,speaker")]
    TextSpeaker,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Derive silence-based break labels from a directory of alignments.
    ExtractLabels {
        alignment_dir: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        threshold_ms: f64,
    },
    /// Emotion × emotion SMC matrix over parallel texts.
    AnalyzeSmc {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "text,speaker")]
        group_by: GroupKey,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Skip groups whose sequences differ in length instead of failing.
        #[arg(long)]
        skip_mismatched: bool,
    },
    /// Train one variant; writes the best checkpoint and report.json to --out.
    Train {
        corpus: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Print the resolved config with per-key sources and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Predict breaks for one utterance per line of a text file.
    Predict {
        checkpoint: PathBuf,
        input: PathBuf,
        /// Print break-annotated text instead of JSONL.
        #[arg(long)]
        annotate: bool,
        #[arg(long, default_value = DEFAULT_MARKER)]
        marker: String,
        /// Also write the JSONL predictions here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score one or more checkpoints on a labeled corpus.
    Evaluate {
        corpus: PathBuf,
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Train and score every system of a systems file on one split.
    Compare {
        corpus: PathBuf,
        systems: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Split seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep checkpoints, predictions and reports per system here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Generate a synthetic labeled corpus.
    GenSynthetic {
        config: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::ExtractLabels {
            alignment_dir,
            out,
            threshold_ms,
        } => extract_labels(&alignment_dir, &out, threshold_ms),
        Command::AnalyzeSmc {
            corpus,
            group_by,
            format,
            skip_mismatched,
        } => analyze_smc(&corpus, group_by, format, skip_mismatched),
        Command::Train {
            corpus,
            variant,
            config,
            out,
            seed,
            epochs,
            learning_rate,
            batch_size,
            alpha,
            print_config,
        } => {
            let mut cfg = CliConfig::defaults();
            if let Some(path) = &config {
                cfg.merge_file(path)?;
            }
            let flags = [
                ("variant", variant.map(|v| json!(v))),
                ("seed", seed.map(|v| json!(v))),
                ("epochs", epochs.map(|v| json!(v))),
                ("learning_rate", learning_rate.map(|v| json!(v))),
                ("batch_size", batch_size.map(|v| json!(v))),
                ("alpha", alpha.map(|v| json!(v))),
            ];
            for (key, value) in flags {
                if let Some(v) = value {
                    cfg.set(key, v, Source::Flag)?;
                }
            }
            if print_config {
                println!("{}", serde_json::to_string_pretty(&cfg.to_json())?);
                return Ok(());
            }
            let Some(out) = out else {
                bail!("--out is required unless --print-config is given");
            };
            train(&corpus, &cfg, &out)
        }
        Command::Predict {
            checkpoint,
            input,
            annotate,
            marker,
            out,
        } => predict(&checkpoint, &input, annotate, &marker, out.as_deref()),
        Command::Evaluate {
            corpus,
            checkpoints,
            format,
        } => evaluate(&corpus, &checkpoints, format),
        Command::Compare {
            corpus,
            systems,
            format,
            seed,
            out,
            sequential,
        } => compare(&corpus, &systems, format, seed, out.as_deref(), !sequential),
        Command::GenSynthetic { config, out, seed } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg: SyntheticConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            let corpus = generate_synthetic_corpus(&cfg, seed)?;
            save_corpus(&corpus, &out)?;
            log::info!("wrote {} utterances to {}", corpus.len(), out.display());
            Ok(())
        }
    }
}

fn alignment_files(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() {
            alignment_files(&path, found)?;
            continue;
        }
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_lowercase);
        if matches!(ext.as_deref(), Some("json" | "textgrid" | "txt")) {
            found.push(path);
        }
    }
    Ok(())
}

/// Default id, emotion and speaker from `<speaker>/<emotion>/<id>.<ext>`.
fn path_meta(path: &Path) -> AlignmentMeta {
    let name = |p: Option<&Path>| p.and_then(|p| p.file_name()).and_then(|n| n.to_str()).map(str::to_string);
    let parent = path.parent();
    AlignmentMeta {
        id: path.file_stem().and_then(|s| s.to_str()).map(str::to_string),
        emotion: name(parent),
        speaker: name(parent.and_then(Path::parent)),
    }
}

fn extract_labels(dir: &Path, out: &Path, threshold_ms: f64) -> Result<()> {
    if !threshold_ms.is_finite() || threshold_ms < 0.0 {
        bail!("--threshold-ms must be a non-negative number");
    }
    let mut files = Vec::new();
    alignment_files(dir, &mut files)?;
    files.sort();
    if files.is_empty() {
        bail!("no alignment files found in {}", dir.display());
    }
    let threshold = threshold_ms / 1000.0;
    let mut utterances = Vec::new();
    let mut failures = Vec::new();
    for path in &files {
        let parsed = std::fs::read_to_string(path)
            .map_err(emopp::Error::from)
            .and_then(|src| parse_alignment(&src, &path_meta(path)))
            .and_then(|aligned| Utterance::from_aligned(&aligned, derive_break_labels(&aligned, threshold)));
        match parsed {
            Ok(u) => utterances.push(u),
            Err(e) => failures.push((path, e)),
        }
    }
    if !utterances.is_empty() {
        let corpus = Corpus::new(utterances, Split::Unsplit)?;
        save_corpus(&corpus, out)?;
        println!("{:<12} {:>10} {:>10}", "emotion", "utterances", "break_rate");
        for (emotion, n, rate) in corpus.break_rates() {
            println!("{:<12} {n:>10} {rate:>10.4}", emotion.as_str());
        }
    }
    if !failures.is_empty() {
        eprintln!("{} of {} alignment files failed:", failures.len(), files.len());
        for (path, e) in &failures {
            eprintln!("  {}: {e}", path.display());
        }
        bail!("label extraction failed for {} file(s)", failures.len());
    }
    Ok(())
}

fn analyze_smc(path: &Path, group_by: GroupKey, format: Format, skip_mismatched: bool) -> Result<()> {
    let corpus = load_corpus(path)?;
    let group_by = match group_by {
        GroupKey::TextSpeaker => GroupBy::TextSpeaker,
        GroupKey::Text => GroupBy::Text,
    };
    let table = EmotionBreakTable::from_corpus(&corpus, group_by)?;
    if table.parallel_groups() == 0 {
        bail!("no parallel groups: no text occurs under two or more emotions");
    }
    let matrix = smc_matrix(&table, SmcOptions { skip_mismatched })?;
    if matrix.skipped_groups > 0 {
        log::warn!("skipped {} groups with mismatched lengths", matrix.skipped_groups);
    }
    print!("{}", render_smc_report(&matrix, format.into())?);
    Ok(())
}

fn train(path: &Path, cfg: &CliConfig, out: &Path) -> Result<()> {
    let train_cfg = cfg.train_config()?;
    let model_cfg = cfg.model_config()?;
    let corpus = load_corpus(path)?;
    let splits = split_corpus(&corpus, SplitRatios::default(), train_cfg.seed)?;
    log::info!(
        "{} train / {} validation / {} test utterances",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len()
    );
    let mut model = EmoPPModel::for_corpus(model_cfg, &splits.train, train_cfg.seed)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("run_config.json"), serde_json::to_string_pretty(&cfg.to_json())?)?;
    let report = train_with_progress(
        &mut model,
        &splits.train,
        &splits.validation,
        &train_cfg,
        Some(out),
        &mut |e| eprintln!("{}", e.progress_line()),
    )?;
    eprintln!(
        "best epoch {} (validation F1 {}); checkpoint in {}",
        report.best_epoch,
        emopp::evaluation::fmt_percent(report.best_val_f1),
        out.display()
    );
    Ok(())
}

fn predict(checkpoint: &Path, input: &Path, annotate: bool, marker: &str, out: Option<&Path>) -> Result<()> {
    let model = EmoPPModel::load(checkpoint)?;
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let placeholder = model.config().emotion_inventory[0].clone();
    let mut records = Vec::new();
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if emopp::corpus::tokenize_text(line).is_empty() {
            log::warn!("line {line_no}: no words, skipped");
            continue;
        }
        let utt = Utterance::from_text(format!("line-{line_no}"), "", placeholder.clone(), line);
        let (emotion, breaks) = model
            .forward(&utt, None)
            .with_context(|| format!("line {line_no}"))?;
        let record = json!({
            "line": line_no,
            "text": line,
            "words": utt.words,
            "breaks": breaks.labels.labels(),
            "emotion": emotion.map(|e| e.label.to_string()),
        });
        if annotate {
            writeln!(stdout, "{}", annotate_breaks(line, &breaks.labels, marker)?)?;
        } else {
            writeln!(stdout, "{record}")?;
        }
        records.push(record);
    }
    if let Some(out) = out {
        let mut f = std::io::BufWriter::new(std::fs::File::create(out)?);
        for r in &records {
            writeln!(f, "{r}")?;
        }
        f.flush()?;
    }
    Ok(())
}

fn evaluate(path: &Path, checkpoints: &[PathBuf], format: Format) -> Result<()> {
    let corpus = load_corpus(path)?;
    let mut rows = Vec::new();
    for ckpt in checkpoints {
        let name = ckpt
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("checkpoint")
            .to_string();
        let scored = EmoPPModel::load(ckpt).and_then(|m| {
            let (report, _) = evaluate_model(&name, &m, &corpus)?;
            Ok((m.variant(), report))
        });
        let row = match scored {
            Ok((variant, report)) => ComparisonRow {
                name,
                variant: variant.as_str().into(),
                outcome: RowOutcome::Scored(report),
            },
            Err(e) => {
                log::error!("{}: {e}", ckpt.display());
                ComparisonRow {
                    name,
                    variant: String::new(),
                    outcome: RowOutcome::Failed(e.to_string()),
                }
            }
        };
        rows.push(row);
    }
    let table = ComparisonTable { rows };
    print!("{}", render_comparison(&table, format.into())?);
    let failed = table.rows.iter().filter(|r| r.report().is_none()).count();
    if failed > 0 {
        bail!("{failed} checkpoint(s) could not be evaluated");
    }
    Ok(())
}

fn compare(path: &Path, systems: &Path, format: Format, seed: u64, out: Option<&Path>, parallel: bool) -> Result<()> {
    let corpus = load_corpus(path)?;
    let text = std::fs::read_to_string(systems).with_context(|| format!("reading {}", systems.display()))?;
    let specs: Vec<SystemSpec> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", systems.display()))?;
    let splits = split_corpus(&corpus, SplitRatios::default(), seed)?;
    let table = compare_systems(&splits, &specs, out, parallel)?;
    print!("{}", render_comparison(&table, format.into())?);
    let failed = table.rows.iter().filter(|r| r.report().is_none()).count();
    if failed > 0 {
        bail!("{failed} system(s) failed");
    }
    Ok(())
}
