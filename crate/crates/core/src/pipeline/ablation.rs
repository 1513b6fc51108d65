//! Leave-one-feature-out ablation of the logistic baseline and attention
//! entropy summaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::{FeatureVector, FEATURE_NAMES};
use crate::net::{forward, train_logreg, Checkpoint, LogRegConfig, LogisticModel, Mode};
use crate::tokenizer::EncodedExample;

use super::split::SplitIndices;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub feature: String,
    pub acc_full: f64,
    pub acc_without: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadEntropy {
    pub layer: usize,
    pub head: usize,
    pub mean_entropy: f64,
}

/// Feature rows and labels keyed by record id. Ids without a vector are
/// skipped (e.g. texts with no words).
pub struct FeatureTable<'a> {
    pub vectors: &'a [Option<FeatureVector>],
    pub labels: &'a [Label],
}

impl FeatureTable<'_> {
    fn gather(&self, ids: &[usize], drop: Option<usize>) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut x = Vec::with_capacity(ids.len());
        let mut y = Vec::with_capacity(ids.len());
        for &id in ids {
            if let Some(Some(v)) = self.vectors.get(id) {
                let row: Vec<f64> = v
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| Some(*j) != drop)
                    .map(|(_, &f)| f)
                    .collect();
                x.push(row);
                y.push(self.labels[id]);
            }
        }
        (x, y)
    }
}

pub fn baseline_accuracy(model: &LogisticModel, x: &[Vec<f64>], y: &[Label]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Config("no examples to score".into()));
    }
    let correct = x.iter().zip(y).filter(|(f, l)| model.predict(f) == **l).count();
    Ok(correct as f64 / x.len() as f64)
}

/// Fits the baseline on the train split (optionally without one feature)
/// and returns it with its validation accuracy.
pub fn fit_and_score(
    table: &FeatureTable<'_>,
    split: &SplitIndices,
    cfg: &LogRegConfig,
    drop: Option<usize>,
    eval_ids: &[usize],
) -> Result<(LogisticModel, f64)> {
    let (xt, yt) = table.gather(&split.train, drop);
    let fit = train_logreg(&xt, &yt, cfg)?;
    let (xv, yv) = table.gather(eval_ids, drop);
    let acc = baseline_accuracy(&fit.model, &xv, &yv)?;
    Ok((fit.model, acc))
}

/// One row per feature, sorted by `delta = acc_full - acc_without`
/// descending; equal deltas keep feature order.
pub fn feature_ablation(table: &FeatureTable<'_>, split: &SplitIndices, cfg: &LogRegConfig, exec: Exec) -> Result<Vec<AblationRow>> {
    let (_, acc_full) = fit_and_score(table, split, cfg, None, &split.val)?;
    let columns: Vec<usize> = (0..FEATURE_NAMES.len()).collect();
    let without = exec.map(&columns, |&j| fit_and_score(table, split, cfg, Some(j), &split.val).map(|(_, a)| a));
    let mut rows = Vec::with_capacity(columns.len());
    for (j, acc) in without.into_iter().enumerate() {
        let acc_without = acc?;
        rows.push(AblationRow {
            feature: FEATURE_NAMES[j].to_string(),
            acc_full,
            acc_without,
            delta: acc_full - acc_without,
        });
    }
    rows.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    Ok(rows)
}

pub fn write_ablation_csv<W: Write>(out: W, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Mean attention entropy `-Σ a ln a` per layer and head, averaged over every
/// query row of every example.
pub fn attention_entropy(checkpoint: &Checkpoint, examples: &[EncodedExample], exec: Exec) -> Result<Vec<HeadEntropy>> {
    if examples.is_empty() {
        return Err(Error::Config("attention summary needs at least one example".into()));
    }
    let cfg = &checkpoint.config;
    let per_example = exec.map(examples, |ex| -> Result<Vec<(f64, usize)>> {
        let out = forward(&checkpoint.params, cfg, &ex.ids, &ex.mask, Mode::Eval, 0)?;
        let mut sums = Vec::with_capacity(cfg.n_layers * cfg.n_heads);
        for layer in &out.attention {
            for map in layer {
                let mut total = 0.0;
                for i in 0..map.rows {
                    total -= map.row(i).iter().filter(|&&a| a > 0.0).map(|&a| a * a.ln()).sum::<f64>();
                }
                sums.push((total, map.rows));
            }
        }
        Ok(sums)
    });
    let mut acc = vec![(0.0, 0usize); cfg.n_layers * cfg.n_heads];
    for r in per_example {
        for (slot, (s, n)) in acc.iter_mut().zip(r?) {
            slot.0 += s;
            slot.1 += n;
        }
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(i, (s, n))| HeadEntropy {
            layer: i / cfg.n_heads,
            head: i % cfg.n_heads,
            mean_entropy: s / n as f64,
        })
        .collect())
}
