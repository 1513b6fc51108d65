//! Synthetic two-source essay corpus.
//!
//! Both sources share a pseudo-word vocabulary, sentence-length distribution,
//! comma/terminator rates and digit rate, so surface stylometrics overlap.
//! They differ in word-sequence entropy:
//!
//! * `Ai` (label 1), the templated source: a walk over a fixed successor
//!   graph on the first [`COMMON_WORDS`] words. Each word has a primary
//!   successor (together the primaries form a single cycle) taken with
//!   probability [`PRIMARY_PROB`], otherwise a fixed secondary successor.
//! * `Human` (label 0), a mixture of two components:
//!   - free writing (weight `1 - FORMULAIC_SHARE`): the same walk, but at
//!     each position with probability `1 - q` a uniformly drawn word from the
//!     whole vocabulary is emitted instead and the walk state is left
//!     unchanged. `q` is drawn per essay from `[HUMAN_Q_MIN, HUMAN_Q_MAX]`.
//!   - formulaic writing (weight [`FORMULAIC_SHARE`]): a deterministic cycle
//!     through its own [`FORMULA_WORDS`] words.
//!
//! Under an n-gram model trained on human texts the formulaic essays score
//! the lowest perplexity, the walk sits in the middle and free writing
//! scores highest. No single threshold on perplexity separates the labels;
//! an interval on perplexity does.

use crate::corpus::{Label, TextRecord};
use crate::rng::Rng;

pub const VOCAB_WORDS: usize = 1500;
pub const COMMON_WORDS: usize = 100;
pub const FORMULA_WORDS: usize = 60;
pub const PRIMARY_PROB: f64 = 0.75;
pub const FORMULAIC_SHARE: f64 = 0.3;
pub const HUMAN_Q_MIN: f64 = 0.2;
pub const HUMAN_Q_MAX: f64 = 0.55;
pub const SENTENCES_MIN: usize = 4;
pub const SENTENCES_MAX: usize = 7;
pub const WORDS_PER_SENTENCE_MIN: usize = 6;
pub const WORDS_PER_SENTENCE_MAX: usize = 12;
pub const COMMA_PROB: f64 = 0.08;
pub const NUMBER_PROB: f64 = 0.02;

/// Vocabulary and successor graph are fixed by this seed, independent of
/// the essay seed, so every corpus shares one language.
const LANGUAGE_SEED: u64 = 0x5EED_1A96;

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "st"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 5] = ["", "", "n", "r", "s"];

/// Which generator writes an essay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Templated,
    FreeWriting { q: f64 },
    Formulaic,
}

#[derive(Debug, Clone)]
pub struct Language {
    pub words: Vec<String>,
    primary: Vec<usize>,
    secondary: Vec<usize>,
}

impl Language {
    pub fn new() -> Self {
        let mut rng = Rng::new(LANGUAGE_SEED);
        let mut seen = std::collections::HashSet::new();
        let mut words = Vec::with_capacity(VOCAB_WORDS);
        while words.len() < VOCAB_WORDS {
            let syllables = 1 + rng.below(3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS[rng.below(ONSETS.len())]);
                w.push_str(VOWELS[rng.below(VOWELS.len())]);
                w.push_str(CODAS[rng.below(CODAS.len())]);
            }
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        let mut order: Vec<usize> = (0..COMMON_WORDS).collect();
        rng.shuffle(&mut order);
        let mut primary = vec![0; COMMON_WORDS];
        for i in 0..COMMON_WORDS {
            primary[order[i]] = order[(i + 1) % COMMON_WORDS];
        }
        let secondary = (0..COMMON_WORDS)
            .map(|i| loop {
                let j = rng.below(COMMON_WORDS);
                if j != i && j != primary[i] {
                    break j;
                }
            })
            .collect();
        Language { words, primary, secondary }
    }

    fn step(&self, state: usize, rng: &mut Rng) -> usize {
        if rng.bernoulli(PRIMARY_PROB) {
            self.primary[state]
        } else {
            self.secondary[state]
        }
    }

    pub fn essay(&self, source: Source, rng: &mut Rng) -> String {
        let n_sentences = SENTENCES_MIN + rng.below(SENTENCES_MAX - SENTENCES_MIN + 1);
        let mut state = rng.below(COMMON_WORDS);
        let mut formula_pos = rng.below(FORMULA_WORDS);
        let mut sentences = Vec::with_capacity(n_sentences);
        for _ in 0..n_sentences {
            let len = WORDS_PER_SENTENCE_MIN
                + rng.below(WORDS_PER_SENTENCE_MAX - WORDS_PER_SENTENCE_MIN + 1);
            let mut s = String::new();
            for i in 0..len {
                let word = match source {
                    Source::Formulaic => {
                        formula_pos = (formula_pos + 1) % FORMULA_WORDS;
                        self.words[COMMON_WORDS + formula_pos].clone()
                    }
                    Source::FreeWriting { q } if !rng.bernoulli(q) => self.words[rng.below(VOCAB_WORDS)].clone(),
                    _ => {
                        state = self.step(state, rng);
                        self.words[state].clone()
                    }
                };
                if i > 0 {
                    if rng.bernoulli(COMMA_PROB) {
                        s.push(',');
                    }
                    s.push(' ');
                }
                if i == 0 {
                    let mut c = word.chars();
                    if let Some(f) = c.next() {
                        s.extend(f.to_uppercase());
                        s.push_str(c.as_str());
                    }
                } else {
                    s.push_str(&word);
                }
                if rng.bernoulli(NUMBER_PROB) {
                    s.push_str(&format!(" {}", 1900 + rng.below(125)));
                }
            }
            let end = match rng.below(10) {
                0 => '?',
                1 => '!',
                _ => '.',
            };
            s.push(end);
            sentences.push(s);
        }
        sentences.join(" ")
    }
}

impl Default for Language {
    fn default() -> Self {
        Self::new()
    }
}

/// `n_per_class` essays of each label, interleaved Human, Ai, Human, ...
/// Record ids are row indices.
pub fn generate(n_per_class: usize, seed: u64) -> Vec<TextRecord> {
    let lang = Language::new();
    let mut out = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class {
        let mut rng = Rng::derived(seed, &[0, i as u64]);
        let source = if rng.bernoulli(FORMULAIC_SHARE) {
            Source::Formulaic
        } else {
            Source::FreeWriting {
                q: rng.uniform(HUMAN_Q_MIN, HUMAN_Q_MAX),
            }
        };
        out.push(TextRecord::new(out.len(), lang.essay(source, &mut rng), Label::Human));
        let mut rng = Rng::derived(seed, &[1, i as u64]);
        out.push(TextRecord::new(out.len(), lang.essay(Source::Templated, &mut rng), Label::Ai));
    }
    out
}

/// CSV with columns `text,generated`.
pub fn to_csv(records: &[TextRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["text", "generated"]).expect("in-memory write");
    for r in records {
        w.write_record([r.raw_text.as_str(), if r.label == Label::Ai { "1" } else { "0" }])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
