use serde::{Deserialize, Serialize};

use crate::corpus::{Label, TextRecord};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];
const MIN_CLASS_SIZE: usize = 3;
// Absorbs representation error in `ratio * n` so that e.g. 0.9 * 10 floors to 9.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn all(&self) -> impl Iterator<Item = usize> + '_ {
        self.train.iter().chain(&self.val).chain(&self.test).copied()
    }
}

fn floor_count(x: f64) -> usize {
    (x + FLOOR_SLACK).floor() as usize
}

/// Per-class split sizes `(train, val, test)` for `n` members.
///
/// Train gets `floor(r_train·n)`, val gets `floor((r_train + r_val)·n) -
/// floor(r_train·n)` and test the remainder, so each count is within one of
/// `ratio·n`.
pub fn class_split_sizes(n: usize, ratios: [f64; 3]) -> (usize, usize, usize) {
    let nf = n as f64;
    let train = floor_count(ratios[0] * nf).min(n);
    let through_val = floor_count((ratios[0] + ratios[1]) * nf).clamp(train, n);
    (train, through_val - train, n - through_val)
}

pub fn validate_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Config(format!("split ratios must be positive, got {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Stratified train/val/test split over record ids. Each class is shuffled
/// with its own seeded stream; each split is returned in ascending id order.
pub fn stratified_split(records: &[TextRecord], ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    let labels: Vec<(usize, Label)> = records.iter().map(|r| (r.id, r.label)).collect();
    stratified_split_labels(&labels, ratios, seed)
}

pub fn stratified_split_labels(items: &[(usize, Label)], ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    validate_ratios(ratios)?;
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for label in [Label::Human, Label::Ai] {
        let mut ids: Vec<usize> = items.iter().filter(|(_, l)| *l == label).map(|(id, _)| *id).collect();
        if ids.len() < MIN_CLASS_SIZE {
            return Err(Error::Config(format!(
                "class {label} has {} members; stratified splitting needs at least {MIN_CLASS_SIZE}",
                ids.len()
            )));
        }
        Rng::derived(seed, &[label.index() as u64]).shuffle(&mut ids);
        let (tr, va, _) = class_split_sizes(ids.len(), ratios);
        out.train.extend_from_slice(&ids[..tr]);
        out.val.extend_from_slice(&ids[tr..tr + va]);
        out.test.extend_from_slice(&ids[tr + va..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
