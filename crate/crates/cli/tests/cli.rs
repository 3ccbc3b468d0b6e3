use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emopp::corpus::{load_corpus, SyntheticConfig};
use serde_json::Value;

fn emopp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emopp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_synthetic(dir: &Path, name: &str, cfg: &SyntheticConfig, seed: u64) -> PathBuf {
    let cfg_path = dir.join(format!("{name}.config.json"));
    std::fs::write(&cfg_path, serde_json::to_string(cfg).unwrap()).unwrap();
    let out = dir.join(format!("{name}.jsonl"));
    let o = emopp(&["gen-synthetic", s(&cfg_path), s(&out), "--seed", &seed.to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn tier(words: &[(&str, f64, f64)]) -> String {
    let mut out = String::from("tier words\n");
    for (w, a, b) in words {
        out.push_str(&format!("{a:.3} {b:.3} {w}\n"));
    }
    out
}

fn small_train_config(dir: &Path) -> PathBuf {
    let path = dir.join("train.json");
    let cfg = serde_json::json!({
        "epochs": 2, "learning_rate": 0.01, "encoder_dim": 8, "emotion_embedding_dim": 4,
        "decoder_hidden": 4, "token_embedding_dim": 6, "word_embedding_dim": 10
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn extract_labels_writes_one_record_per_file() {
    let dir = tempfile::tempdir().unwrap();
    let sad = dir.path().join("align/spk1/sad");
    std::fs::create_dir_all(&sad).unwrap();
    // gaps: 40 ms after "I", 60 ms after "said"
    std::fs::write(sad.join("a.txt"), tier(&[("I", 0.0, 0.3), ("said", 0.34, 0.7), ("no", 0.76, 1.0)])).unwrap();
    std::fs::write(sad.join("b.txt"), tier(&[("well", 0.0, 0.3), ("fine", 0.3, 0.6)])).unwrap();
    let out = dir.path().join("c.jsonl");
    let o = emopp(&["extract-labels", s(&dir.path().join("align")), s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("sad"));
    let corpus = load_corpus(&out).unwrap();
    assert_eq!(corpus.len(), 2);
    let a = &corpus.utterances[0];
    assert_eq!((a.id.as_str(), a.speaker.as_str(), a.emotion.as_str()), ("a", "spk1", "sad"));
    assert_eq!(a.breaks.as_ref().unwrap().labels(), [1, 1, 0]);

    let o = emopp(&["extract-labels", s(&dir.path().join("align")), s(&out), "--threshold-ms", "50"]);
    assert!(o.status.success());
    assert_eq!(load_corpus(&out).unwrap().utterances[0].breaks.as_ref().unwrap().labels(), [0, 1, 0]);
}

#[test]
fn extract_labels_reports_failures_and_empty_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let o = emopp(&["extract-labels", s(&empty), s(&dir.path().join("x.jsonl"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no alignment files found"));

    let happy = dir.path().join("align/s/happy");
    std::fs::create_dir_all(&happy).unwrap();
    std::fs::write(happy.join("ok.txt"), tier(&[("yes", 0.0, 0.2)])).unwrap();
    std::fs::write(happy.join("bad.txt"), "tier words\n0.0 zero word\n").unwrap();
    let o = emopp(&["extract-labels", s(&dir.path().join("align")), s(&dir.path().join("y.jsonl"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bad.txt"), "{}", stderr(&o));
}

#[test]
fn analyze_smc_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let rec = |id: &str, emotion: &str, breaks: &str| {
        format!(
            r#"{{"id":"{id}","speaker":"s","emotion":"{emotion}","text":"a b c d","words":["a","b","c","d"],"breaks":{breaks}}}"#
        )
    };
    // 2 of 4 positions agree
    let lines = [rec("1", "neutral", "[1,0,1,0]"), rec("2", "sad", "[0,0,0,0]")];
    std::fs::write(&path, lines.join("\n")).unwrap();
    let o = emopp(&["analyze-smc", s(&path), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), ",neutral,sad\nneutral,1.00,0.50\nsad,-,1.00\n");

    std::fs::write(&path, rec("1", "neutral", "[1,0,1,0]")).unwrap();
    let o = emopp(&["analyze-smc", s(&path)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no parallel groups"));
}

#[test]
fn print_config_shows_sources_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("unused.jsonl");
    let o = emopp(&["train", s(&corpus), "--print-config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["alpha"], 0.7);
    assert_eq!(v["batch_size"], 16);
    assert_eq!(v["learning_rate"], 1e-5);
    assert_eq!(v["grad_clip_norm"], 10.0);
    assert_eq!(v["epochs"], 10);
    assert_eq!(v["_sources"]["alpha"], "default");

    let file = small_train_config(dir.path());
    let o = emopp(&["train", s(&corpus), "--config", s(&file), "--epochs", "3", "--print-config"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((v["epochs"].as_u64(), v["_sources"]["epochs"].as_str()), (Some(3), Some("flag")));
    assert_eq!(v["_sources"]["encoder_dim"], "file");

    let printed = dir.path().join("printed.json");
    std::fs::write(&printed, stdout(&o)).unwrap();
    let again = emopp(&["train", s(&corpus), "--config", s(&printed), "--print-config"]);
    let w: Value = serde_json::from_str(&stdout(&again)).unwrap();
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("_sources");
        v
    };
    assert_eq!(strip(v), strip(w));
}

#[test]
fn train_predict_evaluate_round() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_synthetic(dir.path(), "c", &SyntheticConfig::coupled(60), 1);
    let cfg = small_train_config(dir.path());
    let run = |variant: &str, out: &Path| {
        let o = emopp(&["train", s(&corpus), "--variant", variant, "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stderr(&o).contains("epoch 1: L="), "{}", stderr(&o));
        let mut report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        report.as_object_mut().unwrap().remove("checkpoint_path");
        report
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("emopp", &a), run("emopp", &b));

    let rec = dir.path().join("rec");
    run("recurrent-only", &rec);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(rec.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved["variant"], "recurrent-only");
    let model = emopp::model::EmoPPModel::load(&rec).unwrap();
    assert!(model.emotion_table().is_none());

    let input = dir.path().join("in.txt");
    std::fs::write(&input, "hello\n\nthe cat sat\n").unwrap();
    let o = emopp(&["predict", s(&a), s(&input)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 2"));
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["breaks"], serde_json::json!([0]));
    assert_eq!(lines[1]["line"], 3);

    let o = emopp(&["predict", s(&a), s(&input), "--annotate"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("hello"));

    let o = emopp(&["evaluate", s(&corpus), s(&a), s(&rec), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.starts_with("system,precision,recall,f1\n"));
}

#[test]
fn predict_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_synthetic(dir.path(), "c", &SyntheticConfig::coupled(30), 2);
    let cfg = small_train_config(dir.path());
    let ckpt = dir.path().join("m");
    let o = emopp(&["train", s(&corpus), "--config", s(&cfg), "--epochs", "1", "--out", s(&ckpt)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg_path = ckpt.join("config.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    v["decoder_hidden"] = 7.into();
    std::fs::write(&cfg_path, v.to_string()).unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "one two\n").unwrap();
    let o = emopp(&["predict", s(&ckpt), s(&input)]);
    assert!(!o.status.success());
    assert!(stdout(&o).is_empty());
}

#[test]
fn compare_prints_one_row_per_system() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_synthetic(dir.path(), "c", &SyntheticConfig::coupled(60), 3);
    let tiny = serde_json::json!({"encoder_dim": 8, "emotion_embedding_dim": 4, "decoder_hidden": 4,
        "token_embedding_dim": 6, "word_embedding_dim": 10});
    let systems: Vec<Value> = ["emopp", "encoder-only", "recurrent-only", "emopp-linear-emotion"]
        .iter()
        .map(|v| {
            let mut model = tiny.clone();
            model["variant"] = (*v).into();
            serde_json::json!({"name": v, "model": model, "train": {"epochs": 1, "learning_rate": 0.01}})
        })
        .collect();
    let path = dir.path().join("systems.json");
    std::fs::write(&path, serde_json::to_string(&systems).unwrap()).unwrap();
    let o = emopp(&["compare", s(&corpus), s(&path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("Model"));
    assert!(lines[1].starts_with("emopp"));
}

#[test]
fn gen_synthetic_is_seeded_and_parallel_covers_emotions() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_synthetic(dir.path(), "a", &SyntheticConfig::coupled(25), 5);
    let b = write_synthetic(dir.path(), "b", &SyntheticConfig::coupled(25), 5);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());

    let p = write_synthetic(dir.path(), "p", &SyntheticConfig::parallel(4, 1), 0);
    let corpus = load_corpus(p).unwrap();
    let mut per_text = std::collections::BTreeMap::<String, usize>::new();
    for u in &corpus.utterances {
        *per_text.entry(u.text.clone()).or_default() += 1;
    }
    assert!(per_text.values().all(|&n| n == 5), "{per_text:?}");
}

#[test]
fn bad_input_exits_nonzero() {
    let o = emopp(&["gen-synthetic", "/nonexistent/config.json", "/tmp/never.jsonl"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
    assert!(stdout(&o).is_empty());
}
