//! Essay corpus loading and the text cleaning pass.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};
use crate::exec::Exec;

pub const DEFAULT_TEXT_COLUMN: &str = "text";
pub const DEFAULT_LABEL_COLUMN: &str = "generated";

/// Origin of an essay. Serialized as the integer used in the dataset (`0`/`1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Human = 0,
    Ai = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Human),
            1 => Some(Label::Ai),
            _ => None,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Label::from_index(v as usize).ok_or_else(|| format!("label must be 0 or 1, got {v}"))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Human => "human",
            Label::Ai => "ai",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRecord {
    pub id: usize,
    pub raw_text: String,
    pub clean_text: String,
    pub label: Label,
}

impl TextRecord {
    /// Builds a record, deriving `clean_text` from `raw_text`.
    pub fn new(id: usize, raw_text: impl Into<String>, label: Label) -> Self {
        let raw_text = raw_text.into();
        let clean_text = clean_text(&raw_text);
        TextRecord {
            id,
            raw_text,
            clean_text,
            label,
        }
    }
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

fn is_decimal_digit(c: char) -> bool {
    get_general_category(c) == GeneralCategory::DecimalNumber
}

/// Unicode punctuation (general category P*).
pub fn is_punct(c: char) -> bool {
    is_punctuation(c)
}

/// Unicode decimal digit (general category Nd).
pub fn is_digit(c: char) -> bool {
    is_decimal_digit(c)
}

/// Normalises essay text: lowercase, drop decimal digits, drop punctuation
/// (categories P*), collapse whitespace runs to one space, trim.
///
/// Lowercasing is applied per character without context, so the result does
/// not depend on where a character sits in the string.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars().flat_map(char::to_lowercase) {
        if is_decimal_digit(c) || is_punctuation(c) {
            continue;
        }
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

/// Checks RFC 4180 quoting: a quote may only open a field, a quoted field must
/// be closed, and a closing quote must be followed by a delimiter, a line break
/// or the end of input. Returns the byte offset of the first violation.
fn check_quoting(bytes: &[u8]) -> std::result::Result<(), (u64, &'static str)> {
    #[derive(PartialEq)]
    enum State {
        FieldStart,
        Unquoted,
        Quoted,
        QuoteInQuoted,
    }
    let mut state = State::FieldStart;
    let mut open_at = 0usize;
    for (i, &b) in bytes.iter().enumerate() {
        state = match (state, b) {
            (State::FieldStart, b'"') => {
                open_at = i;
                State::Quoted
            }
            (State::FieldStart | State::Unquoted, b',' | b'\n' | b'\r') => State::FieldStart,
            (State::Unquoted, b'"') => {
                return Err((i as u64, "quote inside unquoted field"))
            }
            (State::FieldStart | State::Unquoted, _) => State::Unquoted,
            (State::Quoted, b'"') => State::QuoteInQuoted,
            (State::Quoted, _) => State::Quoted,
            (State::QuoteInQuoted, b'"') => State::Quoted,
            (State::QuoteInQuoted, b',' | b'\n' | b'\r') => State::FieldStart,
            (State::QuoteInQuoted, _) => {
                return Err((i as u64, "unexpected character after closing quote"))
            }
        };
    }
    if state == State::Quoted {
        return Err((open_at as u64, "unterminated quoted field"));
    }
    Ok(())
}

fn parse_label(field: &str, row: usize) -> Result<Label> {
    match field.trim() {
        "0" => Ok(Label::Human),
        "1" => Ok(Label::Ai),
        other => Err(Error::Row {
            row,
            message: format!("label must be 0 or 1, got {other:?}"),
        }),
    }
}

/// Parses an in-memory CSV document. See [`load_dataset`].
pub fn parse_dataset(
    bytes: &[u8],
    text_column: &str,
    label_column: &str,
    exec: Exec,
) -> Result<Vec<TextRecord>> {
    let rows = parse_rows(bytes, text_column, Some(label_column))?;
    let records = exec.map_indexed(&rows, |id, (text, label)| {
        TextRecord::new(id, text.clone(), label.expect("label column present"))
    });
    Ok(records)
}

/// Parses CSV rows into `(text, label)` pairs. With `label_column == None`
/// only the text column is required and every label is `None`.
pub fn parse_rows(
    bytes: &[u8],
    text_column: &str,
    label_column: Option<&str>,
) -> Result<Vec<(String, Option<Label>)>> {
    check_quoting(bytes).map_err(|(offset, message)| Error::Parse {
        offset,
        message: message.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let text_idx = find(text_column)?;
    let label_idx = label_column.map(find).transpose()?;

    let mut rows = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let text = rec.get(text_idx).unwrap_or_default();
        if text.trim().is_empty() {
            return Err(Error::Row {
                row,
                message: "empty text field".to_string(),
            });
        }
        let label = match label_idx {
            Some(i) => Some(parse_label(rec.get(i).unwrap_or_default(), row)?),
            None => None,
        };
        rows.push((text.to_string(), label));
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    let offset = e.position().map(|p| p.byte()).unwrap_or(0);
    Error::Parse {
        offset,
        message: e.to_string(),
    }
}

/// Loads a labelled essay CSV (RFC 4180, UTF-8, header row). Records come back
/// in file order with 0-based row ids and `clean_text` populated.
pub fn load_dataset(
    path: impl AsRef<Path>,
    text_column: &str,
    label_column: &str,
) -> Result<Vec<TextRecord>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&bytes, text_column, label_column, Exec::default())
}

/// Nearest-rank quantiles of whitespace-token counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthQuantiles {
    pub p10: usize,
    pub p50: usize,
    pub p90: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerLabel<T> {
    pub human: T,
    pub ai: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_total: usize,
    pub n_human: usize,
    pub n_ai: usize,
    /// `None` for a label with no records.
    pub length_quantiles: PerLabel<Option<LengthQuantiles>>,
}

/// Nearest-rank quantile: the value at 1-based rank `ceil(p * n)` (at least 1).
pub fn nearest_rank(sorted: &[usize], p: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

fn quantiles(mut lengths: Vec<usize>) -> Option<LengthQuantiles> {
    lengths.sort_unstable();
    Some(LengthQuantiles {
        p10: nearest_rank(&lengths, 0.1)?,
        p50: nearest_rank(&lengths, 0.5)?,
        p90: nearest_rank(&lengths, 0.9)?,
    })
}

pub fn corpus_stats(records: &[TextRecord]) -> CorpusStats {
    let lengths = |label: Label| -> Vec<usize> {
        records
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.clean_text.split_whitespace().count())
            .collect()
    };
    let human = lengths(Label::Human);
    let ai = lengths(Label::Ai);
    CorpusStats {
        n_total: records.len(),
        n_human: human.len(),
        n_ai: ai.len(),
        length_quantiles: PerLabel {
            human: quantiles(human),
            ai: quantiles(ai),
        },
    }
}
