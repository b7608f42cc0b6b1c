use crate::contour::ClassLabel;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub dlogits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Two-class cross-entropy: `loss = -ln p[label]`, `dlogits = p - onehot`.
pub fn softmax_cross_entropy(logits: &[f64], label: ClassLabel) -> Result<LossOutput> {
    if logits.len() != 2 {
        return Err(Error::Shape(format!("expected 2 logits, got {}", logits.len())));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric(format!("non-finite logits {logits:?}")));
    }
    let top = if logits[1] > logits[0] { 1 } else { 0 };
    let shifted: Vec<f64> = logits.iter().map(|l| l - logits[top]).collect();
    // ln(Σ exp) = ln(1 + exp(other - top)); ln_1p keeps a confident
    // model's tiny loss accurate.
    let log_total = shifted[1 - top].exp().ln_1p();
    let target = label.index();
    let loss = log_total - shifted[target];
    let probs: Vec<f64> = shifted.iter().map(|s| (s - log_total).exp()).collect();
    let mut dlogits = probs.clone();
    // p_target - 1 written as -p_other to avoid cancellation
    dlogits[target] = -probs[1 - target];
    Ok(LossOutput {
        loss,
        dlogits,
        probs,
    })
}
