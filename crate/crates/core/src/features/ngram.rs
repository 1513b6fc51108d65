//! Word-level n-gram language model with add-k smoothing.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LM_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_K: f64 = 1.0;
/// Words seen fewer times than this in training are mapped to UNK.
pub const MIN_WORD_COUNT: usize = 2;
pub const UNK_WORD: u32 = 0;
/// Padding symbol used only inside contexts; never predicted.
const START: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct NgramLm {
    order: usize,
    k: f64,
    /// Kept words; ids start at 1 (0 is UNK).
    vocab: HashMap<String, u32>,
    context_counts: HashMap<Vec<u32>, u64>,
    ngram_counts: HashMap<Vec<u32>, u64>,
}

impl NgramLm {
    /// Trains on whitespace-tokenized texts. Each text is a separate sequence
    /// prefixed with `order - 1` start symbols.
    pub fn train<S: AsRef<str>>(texts: &[S], order: usize, k: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::Config("n-gram order must be at least 1".into()));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("smoothing constant k must be positive, got {k}")));
        }
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for t in texts {
            for w in t.as_ref().split_whitespace() {
                *freq.entry(w).or_insert(0) += 1;
            }
        }
        if freq.is_empty() {
            return Err(Error::Config("cannot train a language model on an empty corpus".into()));
        }
        let vocab: HashMap<String, u32> = freq
            .iter()
            .filter(|(_, &c)| c >= MIN_WORD_COUNT)
            .enumerate()
            .map(|(i, (w, _))| (w.to_string(), i as u32 + 1))
            .collect();
        let mut lm = NgramLm {
            order,
            k,
            vocab,
            context_counts: HashMap::new(),
            ngram_counts: HashMap::new(),
        };
        for t in texts {
            let ids = lm.word_ids(t.as_ref());
            for gram in lm.grams(&ids) {
                *lm.context_counts.entry(gram[..order - 1].to_vec()).or_insert(0) += 1;
                *lm.ngram_counts.entry(gram).or_insert(0) += 1;
            }
        }
        Ok(lm)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// |V|: kept words plus UNK.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 1
    }

    pub fn word_id(&self, w: &str) -> u32 {
        self.vocab.get(w).copied().unwrap_or(UNK_WORD)
    }

    fn word_ids(&self, text: &str) -> Vec<u32> {
        text.split_whitespace().map(|w| self.word_id(w)).collect()
    }

    /// All `order`-grams of a padded sequence, one per word.
    fn grams(&self, ids: &[u32]) -> Vec<Vec<u32>> {
        let mut padded = vec![START; self.order - 1];
        padded.extend_from_slice(ids);
        padded.windows(self.order).map(<[u32]>::to_vec).collect()
    }

    /// P(word | context) with add-k smoothing. `context` must have `order - 1`
    /// ids; use [`NgramLm::start_context`] for sentence-initial positions.
    pub fn prob(&self, context: &[u32], word: u32) -> f64 {
        debug_assert_eq!(context.len(), self.order - 1);
        let c_ctx = self.context_counts.get(context).copied().unwrap_or(0) as f64;
        let mut key = context.to_vec();
        key.push(word);
        let c = self.ngram_counts.get(&key).copied().unwrap_or(0) as f64;
        (c + self.k) / (c_ctx + self.k * self.vocab_size() as f64)
    }

    pub fn start_context(&self) -> Vec<u32> {
        vec![START; self.order - 1]
    }

    /// Ids that can be predicted: UNK and every kept word.
    pub fn word_ids_all(&self) -> impl Iterator<Item = u32> {
        0..self.vocab_size() as u32
    }

    /// Contexts observed in training.
    pub fn observed_contexts(&self) -> impl Iterator<Item = &[u32]> {
        self.context_counts.keys().map(Vec::as_slice)
    }

    /// Sum of natural-log probabilities and the number of scored words.
    pub fn log_prob(&self, text: &str) -> (f64, usize) {
        let ids = self.word_ids(text);
        let mut total = 0.0;
        for gram in self.grams(&ids) {
            let (ctx, w) = gram.split_at(self.order - 1);
            total += self.prob(ctx, w[0]).ln();
        }
        (total, ids.len())
    }

    /// `exp(-mean ln P(w_i | context_i))` over the words of `text`.
    pub fn perplexity(&self, text: &str) -> Result<f64> {
        let (lp, n) = self.log_prob(text);
        if n == 0 {
            return Err(Error::UndefinedInput("perplexity of a text with no words".into()));
        }
        Ok((-lp / n as f64).exp())
    }

    pub fn to_file(&self) -> LmFile {
        let mut words: Vec<(&String, &u32)> = self.vocab.iter().collect();
        words.sort_by_key(|(_, &id)| id);
        let sorted = |m: &HashMap<Vec<u32>, u64>| {
            let mut v: Vec<(Vec<Option<u32>>, u64)> = m
                .iter()
                .map(|(k, &c)| (k.iter().map(|&i| (i != START).then_some(i)).collect(), c))
                .collect();
            v.sort();
            v
        };
        LmFile {
            format_version: LM_FORMAT_VERSION,
            order: self.order,
            k: self.k,
            words: words.into_iter().map(|(w, _)| w.clone()).collect(),
            context_counts: sorted(&self.context_counts),
            ngram_counts: sorted(&self.ngram_counts),
        }
    }

    pub fn from_file(f: LmFile) -> Result<Self> {
        if f.format_version != LM_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported LM version {}", f.format_version)));
        }
        let unpack = |v: Vec<(Vec<Option<u32>>, u64)>| -> HashMap<Vec<u32>, u64> {
            v.into_iter()
                .map(|(k, c)| (k.into_iter().map(|i| i.unwrap_or(START)).collect(), c))
                .collect()
        };
        Ok(NgramLm {
            order: f.order,
            k: f.k,
            vocab: f.words.into_iter().enumerate().map(|(i, w)| (w, i as u32 + 1)).collect(),
            context_counts: unpack(f.context_counts),
            ngram_counts: unpack(f.ngram_counts),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let s = serde_json::to_string(&self.to_file())?;
        std::fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file(serde_json::from_str(&s)?)
    }
}

/// Serialized LM. Start-padding symbols appear as `null` inside keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmFile {
    pub format_version: u32,
    pub order: usize,
    pub k: f64,
    pub words: Vec<String>,
    pub context_counts: Vec<(Vec<Option<u32>>, u64)>,
    pub ngram_counts: Vec<(Vec<Option<u32>>, u64)>,
}
