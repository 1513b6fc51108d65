//! Binary checkpoint: magic, header length, JSON header, raw tensors.
//!
//! ```text
//! bytes 0..8    b"DTXCKPT\0"
//! bytes 8..16   header length L, u64 little-endian
//! bytes 16..16+L  UTF-8 JSON header (format_version, config, tensor manifest,
//!                 tokenizer hash, optimizer scalars, baseline, history)
//! rest          f64 little-endian arrays, concatenated in manifest order
//! ```
//!
//! The manifest lists the parameters first, then (if present) the Adam first
//! moments as `adam.m.<name>` and second moments as `adam.v.<name>`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::EpochRecord;

use super::adam::{AdamConfig, AdamState};
use super::logreg::LogisticModel;
use super::params::Params;
use super::tensor::Tensor;
use super::ModelConfig;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DTXCKPT\0";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AdamHeader {
    config: AdamConfig,
    t: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
    tokenizer_hash: String,
    adam: Option<AdamHeader>,
    baseline: Option<LogisticModel>,
    history: Vec<EpochRecord>,
    best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: Params,
    pub adam: Option<AdamState>,
    pub tokenizer_hash: String,
    pub baseline: Option<LogisticModel>,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters are stored.
    pub best_epoch: Option<usize>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors: Vec<(String, &Tensor)> = self.params.named();
        if let Some(adam) = &self.adam {
            tensors.extend(adam.m.named().into_iter().map(|(n, t)| (format!("adam.m.{n}"), t)));
            tensors.extend(adam.v.named().into_iter().map(|(n, t)| (format!("adam.v.{n}"), t)));
        }
        let header = Header {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: self.config.clone(),
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
            tokenizer_hash: self.tokenizer_hash.clone(),
            adam: self.adam.as_ref().map(|a| AdamHeader {
                config: a.config,
                t: a.t,
            }),
            baseline: self.baseline.clone(),
            history: self.history.clone(),
            best_epoch: self.best_epoch,
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let n_values: usize = tensors.iter().map(|(_, t)| t.len()).sum();
        let mut out = Vec::with_capacity(16 + json.len() + 8 * n_values);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("checkpoint: {m}"));
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("missing magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body_start = 16usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..body_start])?;
        if header.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {}", header.format_version)));
        }
        header.config.validate()?;

        let mut params = Params::zeros(&header.config);
        let mut adam = header.adam.as_ref().map(|a| AdamState {
            config: a.config,
            t: a.t,
            m: Params::zeros(&header.config),
            v: Params::zeros(&header.config),
        });
        let mut slots: Vec<(String, &mut Tensor)> = Vec::new();
        let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
        slots.extend(names.iter().cloned().zip(params.tensors_mut()));
        if let Some(a) = adam.as_mut() {
            slots.extend(names.iter().map(|n| format!("adam.m.{n}")).zip(a.m.tensors_mut()));
            slots.extend(names.iter().map(|n| format!("adam.v.{n}")).zip(a.v.tensors_mut()));
        }
        if slots.len() != header.tensors.len() {
            return Err(bad("tensor manifest does not match the model configuration"));
        }
        let mut pos = body_start;
        for ((name, t), entry) in slots.into_iter().zip(&header.tensors) {
            if entry.name != name || entry.shape != t.shape {
                return Err(bad(&format!("manifest entry {} does not match expected {name}", entry.name)));
            }
            let end = pos + 8 * t.data.len();
            if end > bytes.len() {
                return Err(bad("truncated tensor data"));
            }
            for (v, chunk) in t.data.iter_mut().zip(bytes[pos..end].chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            pos = end;
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after tensor data"));
        }
        Ok(Checkpoint {
            config: header.config,
            params,
            adam,
            tokenizer_hash: header.tokenizer_hash,
            baseline: header.baseline,
            history: header.history,
            best_epoch: header.best_epoch,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
