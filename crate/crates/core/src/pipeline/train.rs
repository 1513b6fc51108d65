//! Training loop with per-epoch validation and best-epoch retention, plus
//! evaluation.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, TextRecord};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::net::{backward, init_params, predict, AdamConfig, AdamState, Checkpoint, ModelConfig, Mode, Params};
use crate::rng::derive_seed;
use crate::tokenizer::{BpeTokenizer, EncodedExample};

use super::batch::{make_batches, BatchOrder};
use super::metrics::{ConfusionMatrix, Metrics};
use super::split::SplitIndices;

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// When set, a checkpoint of every epoch is written here as `epoch-<k>.ckpt`.
    #[serde(default)]
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 16,
            lr: 5e-4,
            seed: 0,
            snapshot_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

/// One epoch of training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-example training loss over the epoch.
    pub train_loss: f64,
    pub val: Metrics,
}

/// Encodes the records with the given ids, carrying their labels.
pub fn encode_records(
    tok: &BpeTokenizer,
    records: &[TextRecord],
    ids: &[usize],
    max_len: usize,
    exec: Exec,
) -> Result<Vec<EncodedExample>> {
    let by_id: HashMap<usize, &TextRecord> = records.iter().map(|r| (r.id, r)).collect();
    let selected: Vec<&TextRecord> = ids
        .iter()
        .map(|id| by_id.get(id).copied().ok_or_else(|| Error::Config(format!("unknown record id {id}"))))
        .collect::<Result<_>>()?;
    Ok(exec.map(&selected, |r| tok.encode_labeled(&r.clean_text, r.label, max_len)))
}

/// Scores labelled examples in eval mode and aggregates the confusion matrix.
pub fn evaluate_examples(params: &Params, cfg: &ModelConfig, examples: &[EncodedExample], exec: Exec) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty set".into()));
    }
    let preds = exec.map(examples, |ex| predict(params, cfg, ex));
    let mut cm = ConfusionMatrix::default();
    for (ex, p) in examples.iter().zip(preds) {
        let actual = ex.label.ok_or_else(|| Error::Config("evaluation example has no label".into()))?;
        cm.record(actual, p?.label);
    }
    Metrics::from_confusion(cm)
}

/// Evaluates a checkpoint on the records with the given ids.
pub fn evaluate(
    checkpoint: &Checkpoint,
    tok: &BpeTokenizer,
    records: &[TextRecord],
    indices: &[usize],
    exec: Exec,
) -> Result<Metrics> {
    if indices.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty index set".into()));
    }
    if tok.hash() != checkpoint.tokenizer_hash {
        return Err(Error::Config("tokenizer does not match the checkpoint".into()));
    }
    let examples = encode_records(tok, records, indices, checkpoint.config.max_len, exec)?;
    evaluate_examples(&checkpoint.params, &checkpoint.config, &examples, exec)
}

/// Trains the encoder for `train_cfg.epochs` epochs. After each epoch the
/// model is scored on the validation split; the returned checkpoint carries
/// the parameters (and optimizer state) of the epoch with the best
/// validation accuracy, earliest epoch on ties.
pub fn train_loop(
    records: &[TextRecord],
    split: &SplitIndices,
    tok: &BpeTokenizer,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    exec: Exec,
) -> Result<Checkpoint> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    if tok.vocab_size() != model_cfg.vocab_size {
        return Err(Error::Config(format!(
            "tokenizer has {} tokens but the model expects {}",
            tok.vocab_size(),
            model_cfg.vocab_size
        )));
    }
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::Config("train and validation splits must be non-empty".into()));
    }
    let train = encode_records(tok, records, &split.train, model_cfg.max_len, exec)?;
    let val = encode_records(tok, records, &split.val, model_cfg.max_len, exec)?;
    let positions: Vec<usize> = (0..train.len()).collect();

    let seed = train_cfg.seed;
    let mut params = init_params(model_cfg, derive_seed(seed, &[STREAM_INIT]));
    let mut adam = AdamState::new(
        model_cfg,
        AdamConfig {
            lr: train_cfg.lr,
            ..AdamConfig::default()
        },
    );
    let tokenizer_hash = tok.hash();
    let mut history: Vec<EpochRecord> = Vec::with_capacity(train_cfg.epochs);
    let mut best: Option<(f64, usize, Params, AdamState)> = None;

    for epoch in 1..=train_cfg.epochs {
        let batches = make_batches(
            &positions,
            train_cfg.batch_size,
            BatchOrder::Shuffled,
            derive_seed(seed, &[STREAM_SHUFFLE, epoch as u64]),
        );
        let mut loss_sum = 0.0;
        for (b, batch_pos) in batches.iter().enumerate() {
            let batch: Vec<EncodedExample> = batch_pos.iter().map(|&i| train[i].clone()).collect();
            let dropout_seed = derive_seed(seed, &[STREAM_DROPOUT, epoch as u64, b as u64]);
            let (loss, grads) = backward(&params, model_cfg, &batch, Mode::Train, dropout_seed, exec)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}, batch {b}")));
            }
            adam.step(&mut params, &grads)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}, batch {b}: {e}")))?;
            loss_sum += loss * batch.len() as f64;
        }
        let val_metrics = evaluate_examples(&params, model_cfg, &val, exec)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val: val_metrics,
        });
        if best.as_ref().is_none_or(|(acc, ..)| val_metrics.accuracy > *acc) {
            best = Some((val_metrics.accuracy, epoch, params.clone(), adam.clone()));
        }
        if let Some(dir) = &train_cfg.snapshot_dir {
            let snap = Checkpoint {
                config: model_cfg.clone(),
                params: params.clone(),
                adam: Some(adam.clone()),
                tokenizer_hash: tokenizer_hash.clone(),
                baseline: None,
                history: history.clone(),
                best_epoch: Some(epoch),
            };
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            snap.save(dir.join(format!("epoch-{epoch}.ckpt")))?;
        }
    }
    let (_, best_epoch, best_params, best_adam) = best.expect("at least one epoch");
    Ok(Checkpoint {
        config: model_cfg.clone(),
        params: best_params,
        adam: Some(best_adam),
        tokenizer_hash,
        baseline: None,
        history,
        best_epoch: Some(best_epoch),
    })
}

/// Records whose label is `label`, restricted to `ids`.
pub fn texts_with_label<'a>(records: &'a [TextRecord], ids: &[usize], label: Label) -> Vec<&'a str> {
    let by_id: HashMap<usize, &TextRecord> = records.iter().map(|r| (r.id, r)).collect();
    ids.iter()
        .filter_map(|id| by_id.get(id))
        .filter(|r| r.label == label)
        .map(|r| r.clean_text.as_str())
        .collect()
}
