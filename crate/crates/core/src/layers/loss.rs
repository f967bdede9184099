//! Softmax cross-entropy.

use crate::error::{Error, Result};
use crate::layers::tape::{Tape, Var};
use crate::linalg::Mat;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Loss `log Σ exp(v) − v_label` and its gradient `softmax(v) − e_label`.
pub fn softmax_xent(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::ShapeMismatch(format!("label {label} with {} classes", logits.len())));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((lse - logits[label], grad))
}

pub fn softmax_xent_node(t: &mut Tape, logits: Var, label: usize) -> Result<Var> {
    let shape = t.value(logits).shape();
    let (loss, grad) = softmax_xent(t.value(logits).data(), label)?;
    let grad = Mat::from_vec(shape.0, shape.1, grad);
    Ok(t.push(Mat::scalar(loss), vec![logits], Box::new(move |g| Ok(vec![grad.scale(g.as_scalar())]))))
}
