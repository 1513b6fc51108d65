use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Binary confusion counts with `Ai` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, actual: Label, predicted: Label) {
        match (actual, predicted) {
            (Label::Ai, Label::Ai) => self.tp += 1,
            (Label::Human, Label::Human) => self.tn += 1,
            (Label::Human, Label::Ai) => self.fp += 1,
            (Label::Ai, Label::Human) => self.fn_ += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut cm = ConfusionMatrix::default();
        for (a, p) in pairs {
            cm.record(a, p);
        }
        cm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    /// Zero denominators yield 0 rather than NaN. F1 is computed as
    /// `2tp / (2tp + fp + fn)`, which equals `2PR / (P + R)` and needs a
    /// single rounding.
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        let total = cm.total();
        if total == 0 {
            return Err(Error::UndefinedInput("metrics of an empty confusion matrix".into()));
        }
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Ok(Metrics {
            accuracy: ratio(cm.tp + cm.tn, total),
            precision: ratio(cm.tp, cm.tp + cm.fp),
            recall: ratio(cm.tp, cm.tp + cm.fn_),
            f1: ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_),
            confusion: cm,
        })
    }
}

pub fn metrics_from_confusion(cm: ConfusionMatrix) -> Result<Metrics> {
    Metrics::from_confusion(cm)
}
