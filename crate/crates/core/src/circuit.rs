//! Layered ansatz, forward pass and probability readout.
//!
//! Each layer applies RX, RY, RZ to every qubit and then a ring of CNOTs
//! `q → (q+1) mod Q` (no ring for a single qubit). Parameter slot of the
//! rotation about `axis` on qubit `q` in layer `l` is `3·(l·Q + q) + axis`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{amplitude_encode, check_qubits, GateKind, GateOp, StateVector};

const AXES: [GateKind; 3] = [GateKind::Rx, GateKind::Ry, GateKind::Rz];

/// Half-width of the uniform initialization interval for circuit angles.
pub const INIT_HALF_WIDTH: f64 = PI / 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    num_qubits: usize,
    num_layers: usize,
    gates: Vec<GateOp>,
}

impl CircuitSpec {
    pub fn build(num_qubits: usize, num_layers: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        if num_layers == 0 {
            return Err(Error::config("num_layers must be at least 1"));
        }
        let ring = if num_qubits > 1 { num_qubits } else { 0 };
        let mut gates = Vec::with_capacity(num_layers * (3 * num_qubits + ring));
        for layer in 0..num_layers {
            for q in 0..num_qubits {
                for (axis, kind) in AXES.into_iter().enumerate() {
                    gates.push(GateOp::rotation(kind, q, 3 * (layer * num_qubits + q) + axis));
                }
            }
            for q in 0..ring {
                gates.push(GateOp::cnot(q, (q + 1) % num_qubits));
            }
        }
        Ok(Self {
            num_qubits,
            num_layers,
            gates,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn num_parameters(&self) -> usize {
        3 * self.num_qubits * self.num_layers
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    /// Swaps two gates. Used to check order independence of commuting gates.
    pub fn swap_gates(&mut self, a: usize, b: usize) {
        self.gates.swap(a, b);
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::structural(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Applies gates `from..` to `state` with angles bound from `params`.
    pub(crate) fn run_from(&self, state: &mut StateVector, params: &[f64], from: usize) {
        for gate in &self.gates[from..] {
            apply_bound(state, gate, params);
        }
    }

    /// Uniform angles in `[−π/10, π/10]`.
    pub fn init_parameters<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.num_parameters())
            .map(|_| rng.random_range(-INIT_HALF_WIDTH..=INIT_HALF_WIDTH))
            .collect()
    }
}

pub(crate) fn apply_bound(state: &mut StateVector, gate: &GateOp, params: &[f64]) {
    match gate.angle_slot {
        Some(slot) => state.rotate(gate.kind, gate.target, params[slot]),
        None => state.cnot(gate.control.unwrap_or_default(), gate.target),
    }
}

/// Runs the circuit on an already-encoded state.
pub fn forward(spec: &CircuitSpec, params: &[f64], encoded: &StateVector) -> Result<StateVector> {
    if encoded.num_qubits() != spec.num_qubits {
        return Err(Error::structural(format!(
            "state has {} qubits, circuit has {}",
            encoded.num_qubits(),
            spec.num_qubits
        )));
    }
    spec.check_params(params)?;
    let mut out = encoded.clone();
    spec.run_from(&mut out, params, 0);
    Ok(out)
}

/// How basis outcomes become class scores: outcomes `0..C` are kept and
/// renormalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMapping {
    num_classes: usize,
}

impl ClassMapping {
    pub fn new(num_classes: usize, num_qubits: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::config("num_classes must be at least 1"));
        }
        check_class_capacity(num_classes, num_qubits)?;
        Ok(Self { num_classes })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Class distribution from a full outcome distribution. Falls back to
    /// uniform when the kept outcomes carry (almost) no mass.
    pub fn class_probs(&self, outcomes: &[f64]) -> Vec<f64> {
        let kept = &outcomes[..self.num_classes];
        let mass: f64 = kept.iter().sum();
        if mass < MIN_CLASS_MASS {
            return vec![1.0 / self.num_classes as f64; self.num_classes];
        }
        kept.iter().map(|p| p / mass).collect()
    }
}

/// Below this total probability the class readout is treated as uniform.
pub const MIN_CLASS_MASS: f64 = 1e-12;

pub fn check_class_capacity(num_classes: usize, num_qubits: usize) -> Result<()> {
    let capacity = 1usize.checked_shl(num_qubits as u32).unwrap_or(usize::MAX);
    if num_classes > capacity {
        let need = num_classes.next_power_of_two().trailing_zeros();
        return Err(Error::config(format!(
            "num_classes {num_classes} exceeds 2^Q = {capacity}; need ceil(log2 C) = {need} qubits minimum"
        )));
    }
    Ok(())
}

/// Full outcome distribution for one feature vector.
pub fn outcome_probs(spec: &CircuitSpec, params: &[f64], features: &[f64]) -> Result<Vec<f64>> {
    let encoded = amplitude_encode(features, spec.num_qubits)?;
    Ok(forward(spec, params, &encoded)?.probabilities())
}

/// Encode, run, measure, map to classes.
pub fn predict_probs(
    spec: &CircuitSpec,
    params: &[f64],
    mapping: &ClassMapping,
    features: &[f64],
) -> Result<Vec<f64>> {
    check_class_capacity(mapping.num_classes, spec.num_qubits)?;
    Ok(mapping.class_probs(&outcome_probs(spec, params, features)?))
}
