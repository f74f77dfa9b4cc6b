use std::borrow::Borrow;

use rand::Rng;

use crate::circuit::{CircuitSpec, ClassMapping};
use crate::error::Result;
use crate::learn::{classical_local_train, local_train, LabeledSample, LocalOutcome, SoftmaxModel, TrainingHyper};

/// The model every client trains: the quantum circuit classifier or the
/// softmax baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Quantum {
        spec: CircuitSpec,
        mapping: ClassMapping,
    },
    Classical(SoftmaxModel),
}

impl Model {
    pub fn num_parameters(&self) -> usize {
        match self {
            Model::Quantum { spec, .. } => spec.num_parameters(),
            Model::Classical(m) => m.num_parameters(),
        }
    }

    pub fn init_parameters<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Model::Quantum { spec, .. } => spec.init_parameters(rng),
            Model::Classical(m) => m.init_parameters(rng),
        }
    }

    pub fn train<S, R>(&self, data: &[S], init: &[f64], hyper: &TrainingHyper, rng: &mut R) -> Result<LocalOutcome>
    where
        S: Borrow<LabeledSample> + Sync,
        R: Rng + ?Sized,
    {
        match self {
            Model::Quantum { spec, mapping } => local_train(data, init, spec, mapping, hyper, rng),
            Model::Classical(m) => classical_local_train(data, init, m, hyper, rng),
        }
    }
}
