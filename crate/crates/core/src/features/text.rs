//! Readability and stylometric scores computed on raw (uncleaned) text.

use std::collections::HashSet;

use crate::corpus::{is_digit, is_punct};
use crate::error::{Error, Result};

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Whitespace tokens with leading/trailing punctuation removed; tokens that
/// are pure punctuation are dropped.
pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|t| t.trim_matches(is_punct))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Word counts of each sentence. Sentences end at runs of `.`, `!`, `?`;
/// segments with no words are skipped.
pub fn sentence_lengths(text: &str) -> Vec<usize> {
    text.split(is_sentence_end)
        .map(|s| words(s).len())
        .filter(|&n| n > 0)
        .collect()
}

/// Vowel-group syllable estimate: maximal runs of `aeiouy`, minus one for a
/// silent final `e` (but not consonant + `le`), at least one per word.
pub fn syllables(word: &str) -> usize {
    let w: Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0usize;
    let mut prev_vowel = false;
    for &c in &w {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = w.len();
    if n >= 1 && w[n - 1] == 'e' {
        let consonant_le =
            n >= 3 && w[n - 2] == 'l' && w[n - 3].is_alphabetic() && !is_vowel(w[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readability {
    pub flesch_reading_ease: f64,
    pub fk_grade: f64,
    pub avg_sentence_len_words: f64,
    pub avg_syllables_per_word: f64,
}

pub fn readability_scores(raw_text: &str) -> Result<Readability> {
    let ws = words(raw_text);
    if ws.is_empty() {
        return Err(Error::UndefinedInput("readability of a text with no words".into()));
    }
    let n_words = ws.len() as f64;
    let n_sentences = sentence_lengths(raw_text).len().max(1) as f64;
    let n_syllables: usize = ws.iter().map(|w| syllables(w)).sum();
    let wps = n_words / n_sentences;
    let spw = n_syllables as f64 / n_words;
    Ok(Readability {
        flesch_reading_ease: 206.835 - 1.015 * wps - 84.6 * spw,
        fk_grade: 0.39 * wps + 11.8 * spw - 15.59,
        avg_sentence_len_words: wps,
        avg_syllables_per_word: spw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stylometrics {
    pub type_token_ratio: f64,
    pub punctuation_density: f64,
    pub digit_density: f64,
    pub avg_word_len_chars: f64,
    /// Coefficient of variation of sentence lengths (population std / mean).
    pub burstiness: f64,
}

pub fn stylometric_scores(raw_text: &str) -> Result<Stylometrics> {
    let ws = words(raw_text);
    if ws.is_empty() {
        return Err(Error::UndefinedInput("stylometrics of a text with no words".into()));
    }
    let distinct: HashSet<String> = ws.iter().map(|w| w.to_lowercase()).collect();
    let total_chars = raw_text.chars().count() as f64;
    let punct = raw_text.chars().filter(|&c| is_punct(c)).count() as f64;
    let digits = raw_text.chars().filter(|&c| is_digit(c)).count() as f64;
    let word_chars: usize = ws.iter().map(|w| w.chars().count()).sum();

    let lens = sentence_lengths(raw_text);
    let burstiness = if lens.len() < 2 {
        0.0
    } else {
        let n = lens.len() as f64;
        let mean = lens.iter().sum::<usize>() as f64 / n;
        let var = lens.iter().map(|&l| (l as f64 - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean
    };
    Ok(Stylometrics {
        type_token_ratio: distinct.len() as f64 / ws.len() as f64,
        punctuation_density: punct / total_chars,
        digit_density: digits / total_chars,
        avg_word_len_chars: word_chars as f64 / ws.len() as f64,
        burstiness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_cat_sat() {
        let r = readability_scores("The cat sat.").unwrap();
        assert_eq!(r.avg_sentence_len_words, 3.0);
        assert_eq!(r.avg_syllables_per_word, 1.0);
        assert!((r.flesch_reading_ease - 119.19).abs() < 1e-9);
        assert!((r.fk_grade - (-2.62)).abs() < 1e-9);
    }

    #[test]
    fn doubling_keeps_scores() {
        let a = readability_scores("The quick brown fox jumps. It was happy!").unwrap();
        let b = readability_scores("The quick brown fox jumps. It was happy! The quick brown fox jumps. It was happy!")
            .unwrap();
        assert!((a.flesch_reading_ease - b.flesch_reading_ease).abs() < 1e-9);
        assert!((a.fk_grade - b.fk_grade).abs() < 1e-9);
    }

    #[test]
    fn syllable_heuristic() {
        assert_eq!(syllables("the"), 1);
        assert_eq!(syllables("table"), 2);
        assert_eq!(syllables("make"), 1);
        assert_eq!(syllables("beautiful"), 3);
        assert_eq!(syllables("rhythm"), 1);
        assert_eq!(syllables("123"), 1);
        assert_eq!(syllables("syllable"), 3);
    }

    #[test]
    fn sentences_and_words() {
        assert_eq!(sentence_lengths("Hi! Hi there now!"), vec![1, 3]);
        assert_eq!(sentence_lengths("no terminator here"), vec![3]);
        assert_eq!(sentence_lengths("Wait... what?! Yes"), vec![1, 1, 1]);
        assert_eq!(words("-- hello, world! --"), vec!["hello", "world"]);
    }

    #[test]
    fn stylometric_examples() {
        let s = stylometric_scores("a a a a").unwrap();
        assert_eq!(s.type_token_ratio, 0.25);
        assert_eq!(s.punctuation_density, 0.0);
        assert_eq!(s.burstiness, 0.0);
        let s = stylometric_scores("Hi! Hi there now!").unwrap();
        assert!((s.burstiness - 0.5).abs() < 1e-12);
        let s = stylometric_scores("every word differs here").unwrap();
        assert_eq!(s.type_token_ratio, 1.0);
        let s = stylometric_scores("ab 12.").unwrap();
        assert_eq!(s.digit_density, 2.0 / 6.0);
        assert_eq!(s.punctuation_density, 1.0 / 6.0);
    }

    #[test]
    fn no_words_is_undefined() {
        assert!(matches!(readability_scores(" ... "), Err(Error::UndefinedInput(_))));
        assert!(matches!(stylometric_scores(""), Err(Error::UndefinedInput(_))));
    }
}
