use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use detext::synthetic::{generate, to_csv};

fn detext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detext")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TINY_CONFIG: &str = r#"{
  "vocab_size": 400,
  "max_len": 96,
  "model": {"d_model": 16, "n_heads": 2, "n_layers": 1, "d_ff": 32},
  "train": {"epochs": 2, "batch_size": 8, "lr": 0.003},
  "baseline": {"epochs": 200}
}"#;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("corpus.csv"), to_csv(&generate(60, 11))).unwrap();
        fs::write(root.join("run.json"), TINY_CONFIG).unwrap();
        Fixture { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }

    /// Runs a subcommand with the shared config, data and output directory.
    fn run(&self, sub: &str, out: &str, extra: &[&str]) -> Output {
        let config = self.path("run.json");
        let data = self.path("corpus.csv");
        let out = self.path(out);
        let mut args = vec![sub, "--config", &config, "--data", &data, "--out", &out];
        args.extend_from_slice(extra);
        let o = detext(&args);
        assert!(o.status.success(), "{sub} failed: {}", stderr(&o));
        o
    }
}

#[test]
fn usage_errors_exit_1() {
    let o = detext(&[]);
    assert_eq!(o.status.code(), Some(1));
    let o = detext(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    for sub in ["prepare", "train-tokenizer", "features", "train", "eval", "detect", "ablate", "report"] {
        assert!(stderr(&o).contains(sub), "usage should list {sub}");
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let o = detext(&["prepare", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--data"));
    let o = detext(&["detect", "--checkpoint", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--in"));
    let o = detext(&["train", "--epochs", "many"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    assert_eq!(detext(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "text,generated\nsome essay,1\nanother essay,2\n").unwrap();
    let data = bad.to_string_lossy().into_owned();
    let out = dir.path().join("out").to_string_lossy().into_owned();
    let o = detext(&["prepare", "--data", &data, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 1"), "{}", stderr(&o));

    fs::write(&bad, "body,generated\nx,1\n").unwrap();
    let o = detext(&["prepare", "--data", &data, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`text`"));

    let o = detext(&["prepare", "--data", &data, "--out", &out, "--ratios", "0.5,0.5,0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn end_to_end() {
    let fx = Fixture::new();
    fx.run("prepare", "out", &[]);
    let stats = json(&fx.root.join("out/stats.json"));
    assert_eq!(stats["format_version"], 1);
    assert_eq!(stats["n_total"], 120);
    assert_eq!(json(&fx.root.join("out/split.json"))["train"].as_array().unwrap().len(), 96);

    fx.run("train-tokenizer", "out", &[]);
    assert_eq!(json(&fx.root.join("out/tokenizer.json"))["format_version"], 1);

    fx.run("features", "out", &[]);
    let features = fs::read_to_string(fx.root.join("out/features.csv")).unwrap();
    assert_eq!(features.lines().count(), 121);
    assert_eq!(json(&fx.root.join("out/lm.json"))["format_version"], 1);

    let tok = fx.path("out/tokenizer.json");
    fx.run("train", "out", &["--tokenizer", &tok]);
    let history = json(&fx.root.join("out/history.json"));
    assert_eq!(history["format_version"], 1);
    assert_eq!(history["history"].as_array().unwrap().len(), 2);

    // Re-evaluating on the validation split reproduces the best epoch's entry.
    let val_metrics = fx.path("out/val_metrics.json");
    fx.run("eval", "out", &["--split", "val", "--metrics", &val_metrics]);
    let m = json(Path::new(&val_metrics));
    let best = history["best_epoch"].as_u64().unwrap() as usize;
    assert_eq!(m["accuracy"], history["history"][best - 1]["val"]["accuracy"]);
    assert_eq!(m["format_version"], 1);

    fx.run("eval", "out", &[]);
    let metrics = json(&fx.root.join("out/metrics.json"));
    let cm = &metrics["confusion"];
    let total: u64 = ["tp", "tn", "fp", "fn"].iter().map(|k| cm[*k].as_u64().unwrap()).sum();
    assert_eq!(total, 12);

    fx.run("report", "out", &[]);
    let confusion = fs::read_to_string(fx.root.join("out/confusion.csv")).unwrap();
    assert_eq!(confusion, format!("{},{}\n{},{}\n", cm["tn"], cm["fp"], cm["fn"], cm["tp"]));
    let summary = fs::read_to_string(fx.root.join("out/summary.txt")).unwrap();
    assert!(summary.contains(&format!("accuracy:  {:.4}", metrics["accuracy"].as_f64().unwrap())));
    fx.run("report", "out", &[]);
    assert_eq!(fs::read_to_string(fx.root.join("out/summary.txt")).unwrap(), summary);

    let ckpt = fx.path("out/checkpoint.ckpt");
    fx.run("ablate", "out", &["--checkpoint", &ckpt]);
    let ablation = fs::read_to_string(fx.root.join("out/ablation.csv")).unwrap();
    assert_eq!(ablation.lines().next(), Some("feature,acc_full,acc_without,delta"));
    assert_eq!(ablation.lines().count(), 11);
    let attention = json(&fx.root.join("out/attention.json"));
    assert_eq!(attention["format_version"], 1);
    assert_eq!(attention["heads"].as_array().unwrap().len(), 2);

    fs::write(fx.root.join("essays.csv"), "text\nFirst essay here.\n\"Second, quoted essay.\"\nThird one!\n").unwrap();
    let essays = fx.path("essays.csv");
    let verdicts = fx.path("verdicts.jsonl");
    let o = detext(&["detect", "--checkpoint", &ckpt, "--tokenizer", &tok, "--in", &essays, "--out", &verdicts]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<serde_json::Value> = fs::read_to_string(&verdicts)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    for (i, v) in lines.iter().enumerate() {
        assert_eq!(v["id"], i);
        let p = v["p_ai"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(v["label"].as_u64().unwrap(), u64::from(p > 0.5));
    }
}

#[test]
fn train_is_deterministic() {
    let fx = Fixture::new();
    fx.run("train", "a", &["--seed", "7", "--epochs", "1"]);
    fx.run("train", "b", &["--seed", "7", "--epochs", "1"]);
    for f in ["checkpoint.ckpt", "tokenizer.json", "history.json"] {
        let a = fs::read(fx.root.join("a").join(f)).unwrap();
        let b = fs::read(fx.root.join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
}

#[test]
fn flags_override_config() {
    let fx = Fixture::new();
    fx.run("prepare", "out", &["--ratios", "0.5,0.25,0.25", "--seed", "3"]);
    let split = json(&fx.root.join("out/split.json"));
    assert_eq!(split["seed"], 3);
    assert_eq!(split["train"].as_array().unwrap().len(), 60);
}
