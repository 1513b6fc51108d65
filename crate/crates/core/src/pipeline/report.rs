//! Machine-readable metrics and the human-readable report.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::metrics::{ConfusionMatrix, Metrics};
use super::train::EpochRecord;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Metrics JSON: the flat metrics plus the training history, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: u32,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    #[serde(default)]
    pub history: Vec<EpochRecord>,
}

impl MetricsReport {
    pub fn new(metrics: &Metrics, history: Vec<EpochRecord>) -> Self {
        MetricsReport {
            format_version: REPORT_FORMAT_VERSION,
            accuracy: metrics.accuracy,
            precision: metrics.precision,
            recall: metrics.recall,
            f1: metrics.f1,
            confusion: metrics.confusion,
            history,
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            accuracy: self.accuracy,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
            confusion: self.confusion,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: MetricsReport = serde_json::from_str(s)?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported metrics format_version {}", r.format_version)));
        }
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Rows are actual Human, Ai; columns are predicted Human, Ai. No header.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    format!("{},{}\n{},{}\n", cm.tn, cm.fp, cm.fn_, cm.tp)
}

pub fn summary_text(report: &MetricsReport) -> String {
    let cm = &report.confusion;
    let mut s = String::new();
    let _ = writeln!(s, "examples:  {}", cm.total());
    let _ = writeln!(s, "accuracy:  {:.4}", report.accuracy);
    let _ = writeln!(s, "precision: {:.4}", report.precision);
    let _ = writeln!(s, "recall:    {:.4}", report.recall);
    let _ = writeln!(s, "f1:        {:.4}", report.f1);
    let _ = writeln!(s);
    let _ = writeln!(s, "confusion (rows actual, columns predicted; positive class ai)");
    let _ = writeln!(s, "          human      ai");
    let _ = writeln!(s, "human {:>9} {:>7}", cm.tn, cm.fp);
    let _ = writeln!(s, "ai    {:>9} {:>7}", cm.fn_, cm.tp);
    if !report.history.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "epoch  train_loss  val_accuracy");
        for h in &report.history {
            let _ = writeln!(s, "{:>5}  {:>10.4}  {:>12.4}", h.epoch, h.train_loss, h.val.accuracy);
        }
    }
    s
}

/// Writes `confusion.csv` and `summary.txt` into `dir`.
pub fn emit_report(report: &MetricsReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("confusion.csv", confusion_csv(&report.confusion))?;
    write("summary.txt", summary_text(report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_layout() {
        let cm = ConfusionMatrix { tp: 50, tn: 50, fp: 0, fn_: 0 };
        assert_eq!(confusion_csv(&cm), "50,0\n0,50\n");
        let cm = ConfusionMatrix { tp: 1, tn: 2, fp: 3, fn_: 4 };
        assert_eq!(confusion_csv(&cm), "2,3\n4,1\n");
    }

    #[test]
    fn summary_matches_json_to_four_places() {
        let m = Metrics::from_confusion(ConfusionMatrix { tp: 40, tn: 30, fp: 10, fn_: 20 }).unwrap();
        let r = MetricsReport::new(&m, vec![]);
        let back = MetricsReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(summary_text(&back).contains(&format!("accuracy:  {:.4}", back.accuracy)));
        assert!(summary_text(&back).contains("accuracy:  0.7000"));
    }

    #[test]
    fn json_carries_version_and_fn_key() {
        let m = Metrics::from_confusion(ConfusionMatrix { tp: 1, tn: 1, fp: 0, fn_: 0 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&MetricsReport::new(&m, vec![]).to_json()).unwrap();
        assert_eq!(v["format_version"], REPORT_FORMAT_VERSION);
        assert_eq!(v["confusion"]["fn"], 0);
    }
}
