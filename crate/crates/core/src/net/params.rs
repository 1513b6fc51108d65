use crate::error::{Error, Result};
use crate::rng::Rng;

use super::tensor::Tensor;
use super::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub ff_w1: Tensor,
    pub ff_b1: Tensor,
    pub ff_w2: Tensor,
    pub ff_b2: Tensor,
}

/// All trainable tensors. Matrices are `[in × out]` and act on row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tok_emb: Tensor,
    pub pos_emb: Tensor,
    pub layers: Vec<LayerParams>,
    pub lnf_gain: Tensor,
    pub lnf_bias: Tensor,
    pub pool_w: Tensor,
    pub pool_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

enum Fill {
    Glorot,
    Zeros,
    Ones,
}

impl Params {
    fn build(cfg: &ModelConfig, mut fill: impl FnMut(&[usize], Fill) -> Tensor) -> Params {
        let d = cfg.d_model;
        let layers = (0..cfg.n_layers)
            .map(|_| LayerParams {
                ln1_gain: fill(&[d], Fill::Ones),
                ln1_bias: fill(&[d], Fill::Zeros),
                wq: fill(&[d, d], Fill::Glorot),
                wk: fill(&[d, d], Fill::Glorot),
                wv: fill(&[d, d], Fill::Glorot),
                wo: fill(&[d, d], Fill::Glorot),
                ln2_gain: fill(&[d], Fill::Ones),
                ln2_bias: fill(&[d], Fill::Zeros),
                ff_w1: fill(&[d, cfg.d_ff], Fill::Glorot),
                ff_b1: fill(&[cfg.d_ff], Fill::Zeros),
                ff_w2: fill(&[cfg.d_ff, d], Fill::Glorot),
                ff_b2: fill(&[d], Fill::Zeros),
            })
            .collect::<Vec<_>>();
        // Field order here fixes the RNG draw order; keep it equal to `named`.
        let tok_emb = fill(&[cfg.vocab_size, d], Fill::Glorot);
        let pos_emb = fill(&[cfg.max_len, d], Fill::Glorot);
        Params {
            tok_emb,
            pos_emb,
            layers,
            lnf_gain: fill(&[d], Fill::Ones),
            lnf_bias: fill(&[d], Fill::Zeros),
            pool_w: fill(&[d, d], Fill::Glorot),
            pool_b: fill(&[d], Fill::Zeros),
            out_w: fill(&[d, cfg.n_labels], Fill::Glorot),
            out_b: fill(&[cfg.n_labels], Fill::Zeros),
        }
    }

    pub fn zeros(cfg: &ModelConfig) -> Params {
        Params::build(cfg, |shape, _| Tensor::zeros(shape))
    }

    /// Tensors with their manifest names, in serialization order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut v = vec![
            ("tok_emb".to_string(), &self.tok_emb),
            ("pos_emb".to_string(), &self.pos_emb),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (n, t) in [
                ("ln1_gain", &l.ln1_gain),
                ("ln1_bias", &l.ln1_bias),
                ("wq", &l.wq),
                ("wk", &l.wk),
                ("wv", &l.wv),
                ("wo", &l.wo),
                ("ln2_gain", &l.ln2_gain),
                ("ln2_bias", &l.ln2_bias),
                ("ff_w1", &l.ff_w1),
                ("ff_b1", &l.ff_b1),
                ("ff_w2", &l.ff_w2),
                ("ff_b2", &l.ff_b2),
            ] {
                v.push((format!("layers.{i}.{n}"), t));
            }
        }
        v.extend([
            ("lnf_gain".to_string(), &self.lnf_gain),
            ("lnf_bias".to_string(), &self.lnf_bias),
            ("pool_w".to_string(), &self.pool_w),
            ("pool_b".to_string(), &self.pool_b),
            ("out_w".to_string(), &self.out_w),
            ("out_b".to_string(), &self.out_b),
        ]);
        v
    }

    /// Mutable tensors in the same order as [`Params::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.tok_emb, &mut self.pos_emb];
        for l in &mut self.layers {
            v.extend([
                &mut l.ln1_gain,
                &mut l.ln1_bias,
                &mut l.wq,
                &mut l.wk,
                &mut l.wv,
                &mut l.wo,
                &mut l.ln2_gain,
                &mut l.ln2_bias,
                &mut l.ff_w1,
                &mut l.ff_b1,
                &mut l.ff_w2,
                &mut l.ff_b2,
            ]);
        }
        v.extend([
            &mut self.lnf_gain,
            &mut self.lnf_bias,
            &mut self.pool_w,
            &mut self.pool_b,
            &mut self.out_w,
            &mut self.out_b,
        ]);
        v
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    /// Checks every tensor shape against `cfg`.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        let expected = Params::zeros(cfg);
        let ours = self.named();
        let theirs = expected.named();
        if ours.len() != theirs.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                theirs.len(),
                ours.len()
            )));
        }
        for ((name, t), (_, e)) in ours.iter().zip(&theirs) {
            if t.shape != e.shape || t.data.len() != e.data.len() {
                return Err(Error::Shape(format!(
                    "{name}: expected {:?}, found {:?}",
                    e.shape, t.shape
                )));
            }
        }
        Ok(())
    }
}

/// Glorot-uniform matrices (limit `sqrt(6 / (fan_in + fan_out))`), zero
/// biases and shifts, unit layer-norm gains.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Params {
    let mut rng = Rng::new(seed);
    Params::build(cfg, |shape, fill| match fill {
        Fill::Zeros => Tensor::zeros(shape),
        Fill::Ones => Tensor::filled(shape, 1.0),
        Fill::Glorot => {
            let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
            let mut t = Tensor::zeros(shape);
            for x in &mut t.data {
                *x = rng.uniform(-limit, limit);
            }
            t
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            vocab_size: 300,
            max_len: 8,
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            d_ff: 16,
            n_labels: 2,
            dropout_rate: 0.0,
        }
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(init_params(&cfg(), 7), init_params(&cfg(), 7));
        assert_ne!(init_params(&cfg(), 7), init_params(&cfg(), 8));
    }

    #[test]
    fn init_contract() {
        let c = cfg();
        let p = init_params(&c, 1);
        for (name, t) in p.named() {
            if name.ends_with("gain") {
                assert!(t.data.iter().all(|&x| x == 1.0), "{name}");
            }
            if name.ends_with("bias") || name.ends_with("_b") || name.ends_with("_b1") || name.ends_with("_b2") {
                assert!(t.data.iter().all(|&x| x == 0.0), "{name}");
            }
        }
        let bound = (6.0 / (c.vocab_size + c.d_model) as f64).sqrt();
        assert!(p.tok_emb.data.iter().all(|x| x.abs() <= bound));
        assert!(p.tok_emb.data.iter().any(|x| x.abs() > bound / 2.0));
        p.check_shapes(&c).unwrap();
    }

    #[test]
    fn names_and_mut_views_align() {
        let mut p = init_params(&cfg(), 3);
        let shapes: Vec<Vec<usize>> = p.named().iter().map(|(_, t)| t.shape.clone()).collect();
        let shapes_mut: Vec<Vec<usize>> = p.tensors_mut().iter().map(|t| t.shape.clone()).collect();
        assert_eq!(shapes, shapes_mut);
        assert_eq!(p.named().len(), 2 + 12 * 2 + 6);
    }

    #[test]
    fn shape_check_rejects_other_config() {
        let p = init_params(&cfg(), 3);
        let other = ModelConfig { d_ff: 32, ..cfg() };
        assert!(matches!(p.check_shapes(&other), Err(Error::Shape(_))));
    }
}
