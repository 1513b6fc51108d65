//! Run configuration: built-in defaults, then the `--config` JSON file, then
//! command-line flags, each layer overriding the previous one.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use detext::corpus::{DEFAULT_LABEL_COLUMN, DEFAULT_TEXT_COLUMN};
use detext::features::{DEFAULT_K, DEFAULT_ORDER};
use detext::net::{LogRegConfig, ModelConfig};
use detext::pipeline::{TrainConfig, DEFAULT_RATIOS};
use detext::tokenizer::{DEFAULT_MAX_LEN, DEFAULT_VOCAB_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub dropout_rate: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSettings {
            d_model: m.d_model,
            n_heads: m.n_heads,
            n_layers: m.n_layers,
            d_ff: m.d_ff,
            dropout_rate: m.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            snapshot_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmSettings {
    pub order: usize,
    pub k: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            order: DEFAULT_ORDER,
            k: DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub text_column: String,
    pub label_column: String,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub vocab_size: usize,
    pub max_len: usize,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub lm: LmSettings,
    pub baseline: LogRegConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            text_column: DEFAULT_TEXT_COLUMN.to_string(),
            label_column: DEFAULT_LABEL_COLUMN.to_string(),
            ratios: DEFAULT_RATIOS,
            seed: 0,
            vocab_size: DEFAULT_VOCAB_SIZE,
            max_len: DEFAULT_MAX_LEN,
            model: ModelSettings::default(),
            train: TrainSettings::default(),
            lm: LmSettings::default(),
            baseline: LogRegConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    /// Model configuration for a tokenizer with `vocab_size` tokens.
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            max_len: self.max_len,
            d_model: self.model.d_model,
            n_heads: self.model.n_heads,
            n_layers: self.model.n_layers,
            d_ff: self.model.d_ff,
            n_labels: 2,
            dropout_rate: self.model.dropout_rate,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr: self.train.lr,
            seed: self.seed,
            snapshot_dir: self.train.snapshot_dir.clone(),
        }
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated ratios, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("invalid ratio {p:?}"))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.batch_size, 16);
        assert_eq!(c.max_len, 256);
        assert_eq!(c.vocab_size, 2000);
        assert_eq!(c.train.lr, 5e-4);
    }

    #[test]
    fn partial_nested_override() {
        let c: RunConfig = serde_json::from_str(r#"{"train": {"epochs": 2}, "model": {"d_model": 16}}"#).unwrap();
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.train.batch_size, 16);
        assert_eq!(c.model.d_model, 16);
        assert_eq!(c.model.n_heads, 4);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"epochs": 2}"#).is_err());
    }

    #[test]
    fn ratios() {
        assert_eq!(parse_ratios("0.8, 0.1,0.1").unwrap(), [0.8, 0.1, 0.1]);
        assert!(parse_ratios("0.5,0.5").is_err());
        assert!(parse_ratios("a,b,c").is_err());
    }
}
