//! From-scratch transformer-encoder classifier and logistic-regression
//! baseline, all in `f64`.

mod adam;
mod checkpoint;
mod encoder;
mod logreg;
mod loss;
mod params;
mod tensor;

use serde::{Deserialize, Serialize};

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, TensorEntry, CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC};
pub use encoder::{backward, batch_loss, forward, predict, AttentionMap, ForwardOutput, Prediction};
pub use logreg::{train_logreg, LogRegConfig, LogRegFit, LogisticModel};
pub use loss::{cross_entropy_loss, softmax};
pub use params::{init_params, LayerParams, Params};
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// Dropout switch for [`forward`] and [`backward`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub n_labels: usize,
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: crate::tokenizer::DEFAULT_VOCAB_SIZE,
            max_len: crate::tokenizer::DEFAULT_MAX_LEN,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            n_labels: 2,
            dropout_rate: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 || self.n_layers == 0 {
            return fail("d_model, n_heads, d_ff and n_layers must be positive");
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return fail("d_model must be divisible by n_heads");
        }
        if self.n_labels != 2 {
            return fail("n_labels must be 2");
        }
        if self.max_len < 2 {
            return fail("max_len must be at least 2");
        }
        if self.vocab_size < crate::tokenizer::MIN_VOCAB_SIZE {
            return fail("vocab_size is smaller than the byte alphabet plus specials");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail("dropout_rate must be in [0, 1)");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}
