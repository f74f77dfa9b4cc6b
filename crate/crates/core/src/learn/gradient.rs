//! Parameter-shift gradients of the mean cross-entropy.
//!
//! Every outcome probability `p_i(ω) = ⟨ψ|Π_i|ψ⟩` is an expectation value, so
//! the ±π/2 shift rule gives its derivative exactly. The loss gradient is then
//! `Σ_i (∂ℓ/∂p_i) · ½[p_i(ω + π/2·e_d) − p_i(ω − π/2·e_d)]` with `∂ℓ/∂p_i`
//! taken analytically from the class readout.

use std::borrow::Borrow;
use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use super::loss::{cross_entropy, LOSS_FLOOR};
use super::LabeledSample;
use crate::circuit::{apply_bound, check_class_capacity, CircuitSpec, ClassMapping, MIN_CLASS_MASS};
use crate::error::{Error, Result};
use crate::quantum::{amplitude_encode, StateVector};

/// Gradient of [`batch_loss`](super::batch_loss) by the parameter-shift rule.
pub fn parameter_shift_gradient<S: Borrow<LabeledSample> + Sync>(
    spec: &CircuitSpec,
    params: &[f64],
    mapping: &ClassMapping,
    batch: &[S],
) -> Result<Vec<f64>> {
    loss_and_gradient(spec, params, mapping, batch).map(|(_, g)| g)
}

/// Batch loss at `params` together with its parameter-shift gradient.
pub fn loss_and_gradient<S: Borrow<LabeledSample> + Sync>(
    spec: &CircuitSpec,
    params: &[f64],
    mapping: &ClassMapping,
    batch: &[S],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::structural("empty batch"));
    }
    spec.check_params(params)?;
    check_class_capacity(mapping.num_classes(), spec.num_qubits())?;

    // Per-sample work is independent; the reduction below runs in batch
    // order so the result does not depend on thread scheduling.
    let per_sample = batch
        .par_iter()
        .map(|s| sample_loss_and_gradient(spec, params, mapping, s.borrow()))
        .collect::<Result<Vec<_>>>()?;

    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (l, g) in &per_sample {
        loss += l;
        for (acc, x) in grad.iter_mut().zip(g) {
            *acc += x;
        }
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

fn sample_loss_and_gradient(
    spec: &CircuitSpec,
    params: &[f64],
    mapping: &ClassMapping,
    sample: &LabeledSample,
) -> Result<(f64, Vec<f64>)> {
    let encoded = amplitude_encode(&sample.features, spec.num_qubits())?;
    let mut out = encoded.clone();
    spec.run_from(&mut out, params, 0);
    let outcomes = out.probabilities();
    let loss = cross_entropy(&mapping.class_probs(&outcomes), sample.label)?;

    let mut grad = vec![0.0; params.len()];
    let Some(weights) = loss_weights(&outcomes, mapping, sample.label) else {
        return Ok((loss, grad));
    };

    let mut prefix = encoded;
    let mut shifted: StateVector;
    for (idx, gate) in spec.gates().iter().enumerate() {
        if let Some(slot) = gate.angle_slot {
            let mut diff = 0.0;
            for sign in [1.0, -1.0] {
                shifted = prefix.clone();
                shifted.rotate(gate.kind, gate.target, params[slot] + sign * FRAC_PI_2);
                spec.run_from(&mut shifted, params, idx + 1);
                diff += sign * weighted_mass(&shifted, &weights);
            }
            grad[slot] = 0.5 * diff;
        }
        apply_bound(&mut prefix, gate, params);
    }
    Ok((loss, grad))
}

/// `∂ℓ/∂p_i` for the kept outcomes, or `None` where the loss is locally
/// constant (uniform fallback or clamped probability).
fn loss_weights(outcomes: &[f64], mapping: &ClassMapping, label: usize) -> Option<Vec<f64>> {
    let c = mapping.num_classes();
    let mass: f64 = outcomes[..c].iter().sum();
    if mass < MIN_CLASS_MASS || outcomes[label] / mass < LOSS_FLOOR {
        return None;
    }
    // ℓ = −ln p_y + ln S with S = Σ_{i<C} p_i.
    let mut w = vec![1.0 / mass; c];
    w[label] -= 1.0 / outcomes[label];
    Some(w)
}

fn weighted_mass(state: &StateVector, weights: &[f64]) -> f64 {
    state
        .amplitudes()
        .iter()
        .zip(weights)
        .map(|(a, w)| w * a.norm_sqr())
        .sum()
}
