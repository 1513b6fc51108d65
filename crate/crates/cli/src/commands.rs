//! Subcommand implementations. Each reads its inputs, writes its artifacts
//! under the output directory and prints a one-line summary to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use detext::corpus::{clean_text, corpus_stats, load_dataset, parse_rows, Label, TextRecord};
use detext::features::{extract_features, write_feature_csv, FeatureRow, FeatureVector, NgramLm};
use detext::net::{predict, Checkpoint};
use detext::pipeline::{
    attention_entropy, emit_report, encode_records, evaluate, feature_ablation, fit_and_score, stratified_split,
    texts_with_label, train_loop, write_ablation_csv, EpochRecord, FeatureTable, MetricsReport, SplitIndices,
};
use detext::tokenizer::BpeTokenizer;
use detext::Exec;

use crate::config::RunConfig;

pub const OUTPUT_FORMAT_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: exit status 1.
    Usage(String),
    /// Bad data or failed validation: exit status 2.
    Data(String),
}

impl From<detext::Error> for CliError {
    fn from(e: detext::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
    All,
}

/// Per-invocation paths that are not part of the run configuration.
#[derive(Debug, Default)]
pub struct Paths {
    pub checkpoint: Option<PathBuf>,
    pub tokenizer: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    /// `detect` writes verdicts here; stdout when absent.
    pub verdicts: Option<PathBuf>,
    pub split: Option<SplitName>,
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    format_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, body: &T) -> CliResult {
    let v = Versioned {
        format_version: OUTPUT_FORMAT_VERSION,
        body,
    };
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Data(e.to_string()))?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

fn data_path(cfg: &RunConfig) -> CliResult<&Path> {
    cfg.data
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing required flag --data (or `data` in the config file)".into()))
}

fn load_records(cfg: &RunConfig) -> CliResult<Vec<TextRecord>> {
    Ok(load_dataset(data_path(cfg)?, &cfg.text_column, &cfg.label_column)?)
}

fn split_of(cfg: &RunConfig, records: &[TextRecord]) -> CliResult<SplitIndices> {
    Ok(stratified_split(records, cfg.ratios, cfg.seed)?)
}

fn train_tokenizer_on(records: &[TextRecord], split: &SplitIndices, vocab_size: usize) -> CliResult<BpeTokenizer> {
    let texts: Vec<&str> = split.train.iter().map(|&i| records[i].clean_text.as_str()).collect();
    Ok(BpeTokenizer::train(&texts, vocab_size)?)
}

fn load_tokenizer(cfg: &RunConfig, paths: &Paths) -> CliResult<BpeTokenizer> {
    let p = paths.tokenizer.clone().unwrap_or_else(|| cfg.artifact("tokenizer.json"));
    Ok(BpeTokenizer::load(p)?)
}

fn load_checkpoint(cfg: &RunConfig, paths: &Paths) -> CliResult<Checkpoint> {
    let p = paths.checkpoint.clone().unwrap_or_else(|| cfg.artifact("checkpoint.ckpt"));
    Ok(Checkpoint::load(p)?)
}

struct FeatureData {
    lm: NgramLm,
    vectors: Vec<Option<FeatureVector>>,
    labels: Vec<Label>,
    skipped: usize,
}

/// LM on the human texts of the train split, then features for every
/// record. Records whose features are undefined are left out.
fn compute_features(cfg: &RunConfig, records: &[TextRecord], split: &SplitIndices) -> CliResult<FeatureData> {
    let lm = NgramLm::train(&texts_with_label(records, &split.train, Label::Human), cfg.lm.order, cfg.lm.k)?;
    let vectors: Vec<Option<FeatureVector>> =
        extract_features(records, &lm, Exec::default()).into_iter().map(Result::ok).collect();
    let skipped = vectors.iter().filter(|v| v.is_none()).count();
    Ok(FeatureData {
        lm,
        vectors,
        labels: records.iter().map(|r| r.label).collect(),
        skipped,
    })
}

pub fn prepare(cfg: &RunConfig) -> CliResult {
    let records = load_records(cfg)?;
    let split = split_of(cfg, &records)?;
    write_json(&cfg.artifact("stats.json"), &corpus_stats(&records))?;
    #[derive(Serialize)]
    struct SplitFile<'a> {
        seed: u64,
        ratios: [f64; 3],
        #[serde(flatten)]
        split: &'a SplitIndices,
    }
    write_json(
        &cfg.artifact("split.json"),
        &SplitFile {
            seed: cfg.seed,
            ratios: cfg.ratios,
            split: &split,
        },
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["id", "clean_text", "label"]).map_err(csv_err)?;
    for r in &records {
        w.write_record([r.id.to_string(), r.clean_text.clone(), r.label.index().to_string()])
            .map_err(csv_err)?;
    }
    let buf = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    write_bytes(&cfg.artifact("clean.csv"), &buf)?;
    eprintln!(
        "prepared {} records ({} train, {} val, {} test) into {}",
        records.len(),
        split.train.len(),
        split.val.len(),
        split.test.len(),
        cfg.out.display()
    );
    Ok(())
}

pub fn train_tokenizer(cfg: &RunConfig) -> CliResult {
    let records = load_records(cfg)?;
    let split = split_of(cfg, &records)?;
    let tok = train_tokenizer_on(&records, &split, cfg.vocab_size)?;
    let path = cfg.artifact("tokenizer.json");
    write_bytes(&path, tok.to_json().as_bytes())?;
    eprintln!("tokenizer with {} tokens written to {}", tok.vocab_size(), path.display());
    Ok(())
}

pub fn features(cfg: &RunConfig) -> CliResult {
    let records = load_records(cfg)?;
    let split = split_of(cfg, &records)?;
    let fd = compute_features(cfg, &records, &split)?;
    write_bytes(
        &cfg.artifact("lm.json"),
        format!("{}\n", serde_json::to_string(&fd.lm.to_file()).map_err(|e| CliError::Data(e.to_string()))?).as_bytes(),
    )?;
    let rows: Vec<FeatureRow> = records
        .iter()
        .zip(&fd.vectors)
        .filter_map(|(r, v)| {
            v.map(|features| FeatureRow {
                id: r.id,
                label: Some(r.label),
                features,
            })
        })
        .collect();
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &rows)?;
    write_bytes(&cfg.artifact("features.csv"), &buf)?;
    eprintln!(
        "features for {} records written to {} ({} skipped: no words)",
        rows.len(),
        cfg.out.display(),
        fd.skipped
    );
    Ok(())
}

pub fn train(cfg: &RunConfig, paths: &Paths) -> CliResult {
    let records = load_records(cfg)?;
    let split = split_of(cfg, &records)?;
    let tok = match &paths.tokenizer {
        Some(p) => BpeTokenizer::load(p)?,
        None => {
            let tok = train_tokenizer_on(&records, &split, cfg.vocab_size)?;
            write_bytes(&cfg.artifact("tokenizer.json"), tok.to_json().as_bytes())?;
            tok
        }
    };
    let model_cfg = cfg.model_config(tok.vocab_size());
    let mut ckpt = train_loop(&records, &split, &tok, &model_cfg, &cfg.train_config(), Exec::default())?;

    let fd = compute_features(cfg, &records, &split)?;
    let table = FeatureTable {
        vectors: &fd.vectors,
        labels: &fd.labels,
    };
    let (baseline, baseline_val_acc) = fit_and_score(&table, &split, &cfg.baseline, None, &split.val)?;
    ckpt.baseline = Some(baseline);

    let path = paths.checkpoint.clone().unwrap_or_else(|| cfg.artifact("checkpoint.ckpt"));
    write_bytes(&path, &ckpt.to_bytes())?;
    #[derive(Serialize)]
    struct History<'a> {
        best_epoch: Option<usize>,
        baseline_val_accuracy: f64,
        history: &'a [EpochRecord],
    }
    write_json(
        &cfg.artifact("history.json"),
        &History {
            best_epoch: ckpt.best_epoch,
            baseline_val_accuracy: baseline_val_acc,
            history: &ckpt.history,
        },
    )?;
    let best = ckpt.best_epoch.and_then(|e| ckpt.history.get(e - 1));
    eprintln!(
        "trained {} epochs; best epoch {:?} with val accuracy {:.4}; checkpoint {}",
        ckpt.history.len(),
        ckpt.best_epoch,
        best.map_or(f64::NAN, |h| h.val.accuracy),
        path.display()
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig, paths: &Paths) -> CliResult {
    let ckpt = load_checkpoint(cfg, paths)?;
    let tok = load_tokenizer(cfg, paths)?;
    let records = load_records(cfg)?;
    let split = split_of(cfg, &records)?;
    let ids: Vec<usize> = match paths.split.unwrap_or(SplitName::Test) {
        SplitName::Train => split.train.clone(),
        SplitName::Val => split.val.clone(),
        SplitName::Test => split.test.clone(),
        SplitName::All => (0..records.len()).collect(),
    };
    let metrics = evaluate(&ckpt, &tok, &records, &ids, Exec::default())?;
    let report = MetricsReport::new(&metrics, ckpt.history.clone());
    let path = paths.metrics.clone().unwrap_or_else(|| cfg.artifact("metrics.json"));
    write_bytes(&path, report.to_json().as_bytes())?;
    eprintln!("accuracy {:.4} on {} examples; metrics {}", metrics.accuracy, ids.len(), path.display());
    Ok(())
}

pub fn detect(cfg: &RunConfig, paths: &Paths) -> CliResult {
    let input = paths
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing required flag --in".into()))?;
    let ckpt = load_checkpoint(cfg, paths)?;
    let tok = load_tokenizer(cfg, paths)?;
    if tok.hash() != ckpt.tokenizer_hash {
        return Err(CliError::Data("tokenizer does not match the checkpoint".into()));
    }
    let bytes = fs::read(input).map_err(|e| CliError::Data(format!("cannot read {}: {e}", input.display())))?;
    let rows = parse_rows(&bytes, &cfg.text_column, None)?;
    let cleaned: Vec<String> = rows.iter().map(|(t, _)| clean_text(t)).collect();
    let examples = tok.batch_encode(&cleaned, ckpt.config.max_len, Exec::default());
    let preds = Exec::default().map(&examples, |ex| predict(&ckpt.params, &ckpt.config, ex));
    #[derive(Serialize)]
    struct Verdict {
        id: usize,
        p_ai: f64,
        label: Label,
    }
    let mut out = String::new();
    for (id, p) in preds.into_iter().enumerate() {
        let p = p?;
        out.push_str(&serde_json::to_string(&Verdict { id, p_ai: p.p_ai, label: p.label }).expect("verdict serializes"));
        out.push('\n');
    }
    match &paths.verdicts {
        Some(p) => write_bytes(p, out.as_bytes())?,
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(|e| CliError::Data(format!("cannot write verdicts: {e}")))?,
    }
    eprintln!("{} verdicts", rows.len());
    Ok(())
}

pub fn ablate(cfg: &RunConfig, paths: &Paths) -> CliResult {
    let records = load_records(cfg)?;
    let split = split_of(cfg, &records)?;
    let fd = compute_features(cfg, &records, &split)?;
    let table = FeatureTable {
        vectors: &fd.vectors,
        labels: &fd.labels,
    };
    let rows = feature_ablation(&table, &split, &cfg.baseline, Exec::default())?;
    let mut buf = Vec::new();
    write_ablation_csv(&mut buf, &rows)?;
    write_bytes(&cfg.artifact("ablation.csv"), &buf)?;
    if paths.checkpoint.is_some() {
        let ckpt = load_checkpoint(cfg, paths)?;
        let tok = load_tokenizer(cfg, paths)?;
        if tok.hash() != ckpt.tokenizer_hash {
            return Err(CliError::Data("tokenizer does not match the checkpoint".into()));
        }
        let examples = encode_records(&tok, &records, &split.val, ckpt.config.max_len, Exec::default())?;
        let heads = attention_entropy(&ckpt, &examples, Exec::default())?;
        #[derive(Serialize)]
        struct Attention<'a> {
            examples: usize,
            heads: &'a [detext::pipeline::HeadEntropy],
        }
        write_json(
            &cfg.artifact("attention.json"),
            &Attention {
                examples: examples.len(),
                heads: &heads,
            },
        )?;
    }
    eprintln!(
        "ablation over {} features written to {}; largest delta {} {:+.4}",
        rows.len(),
        cfg.out.display(),
        rows[0].feature,
        rows[0].delta
    );
    Ok(())
}

pub fn report(cfg: &RunConfig, paths: &Paths) -> CliResult {
    let path = paths.metrics.clone().unwrap_or_else(|| cfg.artifact("metrics.json"));
    let report = MetricsReport::load(&path)?;
    emit_report(&report, &cfg.out)?;
    eprintln!("report written to {}", cfg.out.display());
    Ok(())
}
