//! Per-essay numeric features: n-gram perplexity, readability and
//! lexical-diversity stylometrics.
//!
//! Perplexity is computed on cleaned text; everything else on the raw text,
//! since cleaning removes the punctuation and digits those scores count.

mod ngram;
mod text;

use std::io::Write;
use std::path::Path;

pub use ngram::{LmFile, NgramLm, DEFAULT_K, DEFAULT_ORDER, LM_FORMAT_VERSION, MIN_WORD_COUNT, UNK_WORD};
pub use text::{
    readability_scores, sentence_lengths, stylometric_scores, syllables, words, Readability,
    Stylometrics,
};

use crate::corpus::{Label, TextRecord};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Bumped whenever the feature list or order changes.
pub const FEATURE_SET_VERSION: u32 = 1;
pub const N_FEATURES: usize = 10;
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "ppl",
    "log_ppl",
    "flesch_reading_ease",
    "fk_grade",
    "avg_sentence_len_words",
    "avg_word_len_chars",
    "type_token_ratio",
    "punctuation_density",
    "digit_density",
    "burstiness",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; N_FEATURES] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|&n| n == name).map(|i| self.0[i])
    }
}

pub fn feature_vector(record: &TextRecord, lm: &NgramLm) -> Result<FeatureVector> {
    let ppl = lm.perplexity(&record.clean_text)?;
    let r = readability_scores(&record.raw_text)?;
    let s = stylometric_scores(&record.raw_text)?;
    let v = [
        ppl,
        ppl.ln(),
        r.flesch_reading_ease,
        r.fk_grade,
        r.avg_sentence_len_words,
        s.avg_word_len_chars,
        s.type_token_ratio,
        s.punctuation_density,
        s.digit_density,
        s.burstiness,
    ];
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!(
            "feature {} of record {}",
            FEATURE_NAMES[i], record.id
        )));
    }
    Ok(FeatureVector(v))
}

/// Feature vectors for many records, in input order.
pub fn extract_features(
    records: &[TextRecord],
    lm: &NgramLm,
    exec: Exec,
) -> Vec<Result<FeatureVector>> {
    exec.map(records, |r| feature_vector(r, lm))
}

/// One row of the feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: usize,
    pub label: Option<Label>,
    pub features: FeatureVector,
}

/// Writes `id,label,<features...>`; an unknown label is left empty.
pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    let mut header = vec!["id", "label"];
    header.extend_from_slice(&FEATURE_NAMES);
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut rec = vec![
            row.id.to_string(),
            row.label.map(|l| l.index().to_string()).unwrap_or_default(),
        ];
        rec.extend(row.features.0.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let headers = r.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    let expected: Vec<&str> = ["id", "label"].into_iter().chain(FEATURE_NAMES).collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Format(format!("feature CSV header must be {}", expected.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let bad = |what: &str| Error::Row {
            row: i,
            message: format!("invalid {what}"),
        };
        let id = rec[0].parse().map_err(|_| bad("id"))?;
        let label = match &rec[1] {
            "" => None,
            "0" => Some(Label::Human),
            "1" => Some(Label::Ai),
            _ => return Err(bad("label")),
        };
        let mut v = [0.0; N_FEATURES];
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = rec[j + 2].parse().map_err(|_| bad(FEATURE_NAMES[j]))?;
        }
        rows.push(FeatureRow {
            id,
            label,
            features: FeatureVector(v),
        });
    }
    Ok(rows)
}
