//! Losses, gradients, optimizers and the client-side training loop.

mod classical;
mod gradient;
mod loss;
mod optim;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};

pub use classical::{classical_local_train, SoftmaxModel};
pub use gradient::{loss_and_gradient, parameter_shift_gradient};
pub use loss::{batch_loss, cross_entropy, LOSS_FLOOR};
pub use optim::{optimizer_step, Optimizer, OptimizerState};
pub use train::{local_train, LocalOutcome};

/// One training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingHyper {
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainingHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            local_epochs: 3,
            batch_size: 16,
            optimizer: Optimizer::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainingHyper {
    /// Field-level violations, empty when valid. `η = 0` is accepted so that
    /// frozen runs can be expressed.
    pub fn violations(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            errs.push(FieldError::new(
                "learning_rate",
                "must be a finite non-negative number",
            ));
        }
        if self.batch_size == 0 {
            errs.push(FieldError::new("batch_size", "must be at least 1"));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                errs.push(FieldError::new(name, "must lie strictly between 0 and 1"));
            }
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            errs.push(FieldError::new("adam_eps", "must be positive"));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Validation(errs))
        }
    }
}
