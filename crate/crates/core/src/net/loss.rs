/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln softmax(logits)[label]` via log-sum-exp.
pub fn cross_entropy_loss(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        for label in 0..2 {
            assert!((cross_entropy_loss(&[0.0, 0.0], label) - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn confident_correct() {
        assert!(cross_entropy_loss(&[100.0, -100.0], 0) < 1e-8);
        assert!((cross_entropy_loss(&[100.0, -100.0], 1) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn hand_value() {
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((cross_entropy_loss(&[1.0, 2.0], 1) - expected).abs() < 1e-15);
        assert!((expected - 0.313262).abs() < 1e-6);
    }

    #[test]
    fn softmax_sums_to_one() {
        for logits in [[3.0, 3.0], [1e3, -1e3], [-0.5, 7.25]] {
            let p = softmax(&logits);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
