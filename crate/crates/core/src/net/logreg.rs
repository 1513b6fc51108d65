//! L2-regularised logistic regression on z-scored features, fitted by
//! full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Standard deviations below this are replaced by it when z-scoring.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            epochs: 500,
            lr: 0.1,
            l2: 1e-4,
        }
    }
}

/// Fitted weights plus the training-set normalisation they expect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegFit {
    pub model: LogisticModel,
    /// Regularised training loss before each accepted step and after the last.
    pub loss_history: Vec<f64>,
    /// Step size in effect at the end (halved whenever a step would raise the loss).
    pub final_lr: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn logit_normalized(&self, z: &[f64]) -> f64 {
        self.bias + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    /// P(label = Ai | x).
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit_normalized(&self.normalize(x)))
    }

    /// Ties (p = 0.5) go to Human.
    pub fn predict(&self, x: &[f64]) -> Label {
        if self.predict_proba(x) > 0.5 {
            Label::Ai
        } else {
            Label::Human
        }
    }
}

/// Mean logistic loss plus `l2/2 · |w|²` (bias not penalised), and its gradient.
fn loss_and_grad(z: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = z.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (x, &t) in z.iter().zip(y) {
        let s = b + x.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        // -[t ln σ(s) + (1-t) ln(1-σ(s))] = softplus(s) - t·s
        loss += softplus(s) - t * s;
        let r = sigmoid(s) - t;
        for (g, xv) in gw.iter_mut().zip(x) {
            *g += r * xv;
        }
        gb += r;
    }
    let reg: f64 = w.iter().map(|v| v * v).sum::<f64>();
    for (g, wv) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wv;
    }
    (loss / n + 0.5 * l2 * reg, gw, gb / n)
}

fn loss_only(z: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = z.len() as f64;
    let data: f64 = z
        .iter()
        .zip(y)
        .map(|(x, &t)| {
            let s = b + x.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            softplus(s) - t * s
        })
        .sum();
    data / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Fits the baseline. A step that would increase the regularised loss is
/// rejected and the step size halved, so the recorded loss never increases.
pub fn train_logreg(features: &[Vec<f64>], labels: &[Label], cfg: &LogRegConfig) -> Result<LogRegFit> {
    if features.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if !labels.contains(&Label::Human) || !labels.contains(&Label::Ai) {
        return Err(Error::Config("logistic regression needs examples of both classes".into()));
    }
    if cfg.lr.is_nan() || cfg.lr <= 0.0 || cfg.l2.is_nan() || cfg.l2 < 0.0 {
        return Err(Error::Config("lr must be positive and l2 non-negative".into()));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().position(|f| f.len() != dim) {
        return Err(Error::Shape(format!("feature row {bad} has the wrong dimension")));
    }
    let n = features.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| features.iter().map(|f| f[j]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..dim)
        .map(|j| {
            let var = features.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n;
            var.sqrt().max(STD_FLOOR)
        })
        .collect();
    let z: Vec<Vec<f64>> = features
        .iter()
        .map(|f| (0..dim).map(|j| (f[j] - mean[j]) / std[j]).collect())
        .collect();
    let y: Vec<f64> = labels.iter().map(|l| l.index() as f64).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut lr = cfg.lr;
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    for _ in 0..cfg.epochs {
        let (loss, gw, gb) = loss_and_grad(&z, &y, &w, b, cfg.l2);
        history.push(loss);
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - lr * g).collect();
            let b_new = b - lr * gb;
            let new_loss = loss_only(&z, &y, &w_new, b_new, cfg.l2);
            if new_loss <= loss {
                w = w_new;
                b = b_new;
                break;
            }
            lr *= 0.5;
            if lr < 1e-300 {
                break;
            }
        }
    }
    history.push(loss_only(&z, &y, &w, b, cfg.l2));
    if !w.iter().all(|v| v.is_finite()) || !b.is_finite() {
        return Err(Error::NonFinite("logistic regression weights".into()));
    }
    Ok(LogRegFit {
        model: LogisticModel {
            weights: w,
            bias: b,
            mean,
            std,
        },
        loss_history: history,
        final_lr: lr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn separable() -> (Vec<Vec<f64>>, Vec<Label>) {
        let labels: Vec<Label> = (0..40).map(|i| Label::from_index(i % 2).unwrap()).collect();
        let x = labels.iter().map(|l| vec![l.index() as f64]).collect();
        (x, labels)
    }

    fn noisy(seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = Rng::new(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..80 {
            let l = Label::from_index(i % 2).unwrap();
            let shift = l.index() as f64 * 0.7;
            x.push(vec![rng.uniform(-1.0, 1.0) + shift, rng.uniform(-3.0, 3.0), 5.0]);
            y.push(l);
        }
        (x, y)
    }

    fn accuracy(m: &LogisticModel, x: &[Vec<f64>], y: &[Label]) -> f64 {
        x.iter().zip(y).filter(|(f, l)| m.predict(f) == **l).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_reaches_high_accuracy() {
        let (x, y) = separable();
        let fit = train_logreg(&x, &y, &LogRegConfig { epochs: 500, lr: 0.1, l2: 1e-4 }).unwrap();
        assert!(accuracy(&fit.model, &x, &y) >= 0.99);
    }

    #[test]
    fn loss_never_increases() {
        for seed in 0..5 {
            let (x, y) = noisy(seed);
            let fit = train_logreg(&x, &y, &LogRegConfig { epochs: 300, lr: 0.01, l2: 1e-3 }).unwrap();
            for w in fit.loss_history.windows(2) {
                assert!(w[1] <= w[0], "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn huge_penalty_shrinks_weights() {
        let (x, y) = noisy(1);
        let fit = train_logreg(&x, &y, &LogRegConfig { epochs: 200, lr: 0.1, l2: 1e6 }).unwrap();
        assert!(fit.model.weights.iter().all(|w| w.abs() < 1e-6), "{:?}", fit.model.weights);
    }

    #[test]
    fn constant_feature_gets_floor_std() {
        let (x, y) = noisy(2);
        let fit = train_logreg(&x, &y, &LogRegConfig::default()).unwrap();
        assert_eq!(fit.model.std[2], STD_FLOOR);
        assert_eq!(fit.model.weights[2], 0.0);
    }

    #[test]
    fn single_class_is_error() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_logreg(&x, &[Label::Ai, Label::Ai], &LogRegConfig::default()),
            Err(Error::Config(_))
        ));
    }
}
