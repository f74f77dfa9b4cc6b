use std::borrow::Borrow;

use super::LabeledSample;
use crate::circuit::{predict_probs, CircuitSpec, ClassMapping};
use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before taking the logarithm.
pub const LOSS_FLOOR: f64 = 1e-12;

/// `−ln max(p_y, 1e-12)`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or_else(|| {
        Error::structural(format!(
            "label {label} out of range for {} classes",
            probs.len()
        ))
    })?;
    Ok(-p.max(LOSS_FLOOR).ln())
}

/// Mean cross-entropy over a non-empty batch.
pub fn batch_loss<S: Borrow<LabeledSample>>(
    spec: &CircuitSpec,
    params: &[f64],
    mapping: &ClassMapping,
    batch: &[S],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::structural("empty batch"));
    }
    let mut total = 0.0;
    for sample in batch {
        let sample = sample.borrow();
        let probs = predict_probs(spec, params, mapping, &sample.features)?;
        total += cross_entropy(&probs, sample.label)?;
    }
    Ok(total / batch.len() as f64)
}
