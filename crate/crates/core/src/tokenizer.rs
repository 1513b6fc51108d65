//! Byte-level BPE tokenizer.
//!
//! Ids `0..4` are the specials (`<pad>`, `<bos>`, `<eos>`, `<unk>`), ids
//! `4..260` are the 256 single bytes and every learned merge appends one id.
//! No pre-splitting is done: merges may span spaces.
//!
//! In the JSON file, token byte strings are escaped so the file is valid UTF-8
//! and special names cannot collide with byte tokens: bytes `0x20..=0x7e`
//! other than `\`, `<` and `>` are written literally, every other byte as
//! `\xHH` (lowercase hex).

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::exec::Exec;

pub const TOKENIZER_FORMAT_VERSION: u32 = 1;
pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
const N_SPECIALS: u32 = 4;
const BYTE_OFFSET: u32 = N_SPECIALS;
/// 256 byte symbols plus the four specials.
pub const MIN_VOCAB_SIZE: usize = 256 + N_SPECIALS as usize;
pub const DEFAULT_VOCAB_SIZE: usize = 2000;
pub const DEFAULT_MAX_LEN: usize = 256;

const SPECIAL_NAMES: [(&str, &str, u32); 4] = [
    ("pad", "<pad>", PAD),
    ("bos", "<bos>", BOS),
    ("eos", "<eos>", EOS),
    ("unk", "<unk>", UNK),
];

type Pair = (u32, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeTokenizer {
    /// Learned merges in rank order.
    merges: Vec<Pair>,
    /// Byte string of every id; empty for specials.
    tokens: Vec<Vec<u8>>,
    ranks: HashMap<Pair, (u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedExample {
    pub ids: Vec<u32>,
    pub mask: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl EncodedExample {
    /// Number of attended positions.
    pub fn len(&self) -> usize {
        self.mask.iter().map(|&m| m as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_len(&self) -> usize {
        self.ids.len()
    }
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: i64,
    left: Vec<u8>,
    right: Vec<u8>,
    pair: Pair,
}

impl Ord for Candidate {
    // Max-heap on count, then on the lexicographically smaller (left, right).
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| (&other.left, &other.right).cmp(&(&self.left, &self.right)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn add_pairs(seq: &[u32], weight: i64, counts: &mut HashMap<Pair, i64>, touched: &mut HashSet<Pair>) {
    for w in seq.windows(2) {
        let p = (w[0], w[1]);
        *counts.entry(p).or_insert(0) += weight;
        touched.insert(p);
    }
}

fn merge_in_place(seq: &mut Vec<u32>, pair: Pair, new_id: u32) -> bool {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    let mut changed = false;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == pair.0 && seq[i + 1] == pair.1 {
            out.push(new_id);
            i += 2;
            changed = true;
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    *seq = out;
    changed
}

impl BpeTokenizer {
    fn base() -> Self {
        let mut tokens = vec![Vec::new(); N_SPECIALS as usize];
        tokens.extend((0..=255u8).map(|b| vec![b]));
        BpeTokenizer {
            merges: Vec::new(),
            tokens,
            ranks: HashMap::new(),
        }
    }

    /// Learns merges from `texts` until the vocabulary holds `vocab_size`
    /// tokens or no adjacent pair occurs at least twice.
    ///
    /// Pair frequency counts every adjacent position (overlaps included); ties
    /// go to the pair whose `(left bytes, right bytes)` is lexicographically
    /// smaller. A pair whose merged byte string already exists is skipped so
    /// each token string has exactly one id.
    pub fn train<S: AsRef<str>>(texts: &[S], vocab_size: usize) -> Result<Self> {
        if vocab_size < MIN_VOCAB_SIZE {
            return Err(Error::Config(format!(
                "vocab_size must be at least {MIN_VOCAB_SIZE}, got {vocab_size}"
            )));
        }
        if texts.is_empty() {
            return Err(Error::Config("cannot train a tokenizer on an empty corpus".into()));
        }
        let mut tok = BpeTokenizer::base();

        // Identical texts are merged identically, so train on unique texts with weights.
        let mut weights: BTreeMap<&str, i64> = BTreeMap::new();
        for t in texts {
            *weights.entry(t.as_ref()).or_insert(0) += 1;
        }
        let mut seqs: Vec<Vec<u32>> = Vec::with_capacity(weights.len());
        let mut seq_weight: Vec<i64> = Vec::with_capacity(weights.len());
        for (t, w) in &weights {
            seqs.push(t.bytes().map(|b| b as u32 + BYTE_OFFSET).collect());
            seq_weight.push(*w);
        }

        let mut counts: HashMap<Pair, i64> = HashMap::new();
        let mut where_seen: HashMap<Pair, Vec<usize>> = HashMap::new();
        let mut touched = HashSet::new();
        for (i, seq) in seqs.iter().enumerate() {
            add_pairs(seq, seq_weight[i], &mut counts, &mut touched);
            for w in seq.windows(2) {
                where_seen.entry((w[0], w[1])).or_default().push(i);
            }
        }
        let mut heap: BinaryHeap<Candidate> = counts
            .iter()
            .map(|(&pair, &count)| tok.candidate(pair, count))
            .collect();
        let mut seen_strings: HashSet<Vec<u8>> = tok.tokens[N_SPECIALS as usize..].iter().cloned().collect();

        while tok.tokens.len() < vocab_size {
            let Some(best) = heap.pop() else { break };
            if counts.get(&best.pair).copied().unwrap_or(0) != best.count {
                continue;
            }
            if best.count < 2 {
                break;
            }
            let mut merged = best.left.clone();
            merged.extend_from_slice(&best.right);
            if seen_strings.contains(&merged) {
                continue;
            }
            let new_id = tok.tokens.len() as u32;
            tok.push_merge(best.pair, merged.clone());
            seen_strings.insert(merged);

            let mut locs = where_seen.remove(&best.pair).unwrap_or_default();
            locs.sort_unstable();
            locs.dedup();
            touched.clear();
            for i in locs {
                let w = seq_weight[i];
                let before = seqs[i].clone();
                if !merge_in_place(&mut seqs[i], best.pair, new_id) {
                    continue;
                }
                add_pairs(&before, -w, &mut counts, &mut touched);
                add_pairs(&seqs[i], w, &mut counts, &mut touched);
                for win in seqs[i].windows(2) {
                    if win[0] == new_id || win[1] == new_id {
                        where_seen.entry((win[0], win[1])).or_default().push(i);
                    }
                }
            }
            let mut touched_sorted: Vec<Pair> = touched.iter().copied().collect();
            touched_sorted.sort_unstable();
            for p in touched_sorted {
                let c = counts.get(&p).copied().unwrap_or(0);
                if c <= 0 {
                    counts.remove(&p);
                } else {
                    heap.push(tok.candidate(p, c));
                }
            }
        }
        Ok(tok)
    }

    fn candidate(&self, pair: Pair, count: i64) -> Candidate {
        Candidate {
            count,
            left: self.tokens[pair.0 as usize].clone(),
            right: self.tokens[pair.1 as usize].clone(),
            pair,
        }
    }

    fn push_merge(&mut self, pair: Pair, bytes: Vec<u8>) {
        let new_id = self.tokens.len() as u32;
        self.ranks.insert(pair, (self.merges.len() as u32, new_id));
        self.merges.push(pair);
        self.tokens.push(bytes);
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn merges(&self) -> impl Iterator<Item = (&[u8], &[u8])> {
        self.merges
            .iter()
            .map(|&(l, r)| (self.tokens[l as usize].as_slice(), self.tokens[r as usize].as_slice()))
    }

    /// Byte string of a token id (empty for specials).
    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.tokens.get(id as usize).map(Vec::as_slice)
    }

    /// Splits `text` into subword ids by applying merges in learned order.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let mut sym: Vec<u32> = text.bytes().map(|b| b as u32 + BYTE_OFFSET).collect();
        let n = sym.len();
        if n < 2 || self.merges.is_empty() {
            return sym;
        }
        let mut next: Vec<usize> = (1..=n).collect();
        let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
        let mut alive = vec![true; n];
        let mut heap: BinaryHeap<Reverse<(u32, usize)>> = BinaryHeap::new();
        for i in 0..n - 1 {
            if let Some(&(rank, _)) = self.ranks.get(&(sym[i], sym[i + 1])) {
                heap.push(Reverse((rank, i)));
            }
        }
        while let Some(Reverse((rank, pos))) = heap.pop() {
            if !alive[pos] || next[pos] >= n {
                continue;
            }
            let nx = next[pos];
            let Some(&(r, new_id)) = self.ranks.get(&(sym[pos], sym[nx])) else {
                continue;
            };
            if r != rank {
                continue;
            }
            sym[pos] = new_id;
            alive[nx] = false;
            next[pos] = next[nx];
            if next[pos] < n {
                prev[next[pos]] = pos;
                if let Some(&(r2, _)) = self.ranks.get(&(sym[pos], sym[next[pos]])) {
                    heap.push(Reverse((r2, pos)));
                }
            }
            let pv = prev[pos];
            if pv < n {
                if let Some(&(r2, _)) = self.ranks.get(&(sym[pv], sym[pos])) {
                    heap.push(Reverse((r2, pv)));
                }
            }
        }
        (0..n).filter(|&i| alive[i]).map(|i| sym[i]).collect()
    }

    /// Encodes to exactly `max_len` ids: `BOS`, subwords (truncated to
    /// `max_len - 2`), `EOS`, then `PAD`. Panics if `max_len < 2`.
    pub fn encode(&self, text: &str, max_len: usize) -> EncodedExample {
        assert!(max_len >= 2, "max_len must be at least 2");
        let mut pieces = self.tokenize(text);
        pieces.truncate(max_len - 2);
        let mut ids = Vec::with_capacity(max_len);
        ids.push(BOS);
        ids.extend_from_slice(&pieces);
        ids.push(EOS);
        let used = ids.len();
        ids.resize(max_len, PAD);
        let mut mask = vec![1u8; used];
        mask.resize(max_len, 0);
        EncodedExample {
            ids,
            mask,
            label: None,
        }
    }

    pub fn encode_labeled(&self, text: &str, label: Label, max_len: usize) -> EncodedExample {
        EncodedExample {
            label: Some(label),
            ..self.encode(text, max_len)
        }
    }

    pub fn batch_encode<S: AsRef<str> + Sync>(
        &self,
        texts: &[S],
        max_len: usize,
        exec: Exec,
    ) -> Vec<EncodedExample> {
        exec.map(texts, |t| self.encode(t.as_ref(), max_len))
    }

    /// Inverse of [`BpeTokenizer::encode`]: drops PAD/BOS/EOS and decodes the
    /// concatenated bytes as UTF-8 (lossy).
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut bytes = Vec::new();
        for &id in ids {
            let tok = self.tokens.get(id as usize).ok_or(Error::TokenRange {
                id,
                vocab_size: self.tokens.len(),
            })?;
            if id == UNK {
                bytes.extend_from_slice("\u{FFFD}".as_bytes());
            }
            bytes.extend_from_slice(tok);
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    pub fn to_file(&self) -> TokenizerFile {
        let mut vocab = BTreeMap::new();
        for &(_, name, id) in &SPECIAL_NAMES {
            vocab.insert(name.to_string(), id);
        }
        for (id, bytes) in self.tokens.iter().enumerate().skip(N_SPECIALS as usize) {
            vocab.insert(escape_bytes(bytes), id as u32);
        }
        TokenizerFile {
            format_version: TOKENIZER_FORMAT_VERSION,
            merges: self.merges().map(|(l, r)| [escape_bytes(l), escape_bytes(r)]).collect(),
            vocab,
            specials: SPECIAL_NAMES.iter().map(|&(k, _, id)| (k.to_string(), id)).collect(),
        }
    }

    pub fn from_file(file: &TokenizerFile) -> Result<Self> {
        if file.format_version != TOKENIZER_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported tokenizer version {}", file.format_version)));
        }
        for &(key, name, id) in &SPECIAL_NAMES {
            if file.specials.get(key) != Some(&id) || file.vocab.get(name) != Some(&id) {
                return Err(Error::Format(format!("special `{key}` must have id {id}")));
            }
        }
        let mut tokens: Vec<Option<Vec<u8>>> = vec![None; file.vocab.len()];
        for (s, &id) in &file.vocab {
            let slot = tokens
                .get_mut(id as usize)
                .ok_or_else(|| Error::Format(format!("vocab id {id} is not contiguous")))?;
            if slot.is_some() {
                return Err(Error::Format(format!("duplicate vocab id {id}")));
            }
            *slot = Some(if id < N_SPECIALS { Vec::new() } else { unescape_bytes(s)? });
        }
        let tokens: Vec<Vec<u8>> = tokens.into_iter().map(|t| t.expect("filled")).collect();
        let mut tok = BpeTokenizer::base();
        if tokens[..MIN_VOCAB_SIZE] != tok.tokens[..] {
            return Err(Error::Format("ids 4..260 must be the 256 single bytes".into()));
        }
        let index: HashMap<&[u8], u32> = tokens
            .iter()
            .enumerate()
            .skip(N_SPECIALS as usize)
            .map(|(i, t)| (t.as_slice(), i as u32))
            .collect();
        for (rank, [l, r]) in file.merges.iter().enumerate() {
            let (lb, rb) = (unescape_bytes(l)?, unescape_bytes(r)?);
            let lookup = |b: &[u8]| {
                index
                    .get(b)
                    .copied()
                    .ok_or_else(|| Error::Format(format!("merge {rank} uses unknown token {:?}", escape_bytes(b))))
            };
            let pair = (lookup(&lb)?, lookup(&rb)?);
            let mut merged = lb.clone();
            merged.extend_from_slice(&rb);
            let expected = MIN_VOCAB_SIZE + rank;
            if lookup(&merged)? as usize != expected {
                return Err(Error::Format(format!("merge {rank} output must have id {expected}")));
            }
            tok.push_merge(pair, merged);
        }
        if tok.tokens.len() != tokens.len() {
            return Err(Error::Format("vocab has tokens not produced by any merge".into()));
        }
        Ok(tok)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("tokenizer serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    /// SHA-256 (hex) of the serialized tokenizer; ties checkpoints to their tokenizer.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// On-disk tokenizer layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerFile {
    pub format_version: u32,
    pub merges: Vec<[String; 2]>,
    pub vocab: BTreeMap<String, u32>,
    pub specials: BTreeMap<String, u32>,
}

pub fn escape_bytes(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len());
    for &b in bytes {
        if (0x20..=0x7e).contains(&b) && !matches!(b, b'\\' | b'<' | b'>') {
            s.push(b as char);
        } else {
            s.push_str(&format!("\\x{b:02x}"));
        }
    }
    s
}

pub fn unescape_bytes(s: &str) -> Result<Vec<u8>> {
    let bad = || Error::Format(format!("bad token escape in {s:?}"));
    let raw = s.as_bytes();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        match raw[i] {
            b'\\' => {
                if raw.get(i + 1) != Some(&b'x') || i + 4 > raw.len() {
                    return Err(bad());
                }
                let hex = std::str::from_utf8(&raw[i + 2..i + 4]).map_err(|_| bad())?;
                out.push(u8::from_str_radix(hex, 16).map_err(|_| bad())?);
                i += 4;
            }
            b if (0x20..=0x7e).contains(&b) && b != b'<' && b != b'>' => {
                out.push(b);
                i += 1;
            }
            _ => return Err(bad()),
        }
    }
    Ok(out)
}
