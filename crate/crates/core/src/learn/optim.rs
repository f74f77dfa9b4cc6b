use serde::{Deserialize, Serialize};

use super::TrainingHyper;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

/// Adam moment estimates. SGD leaves the moments untouched but still counts
/// steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(num_parameters: usize) -> Self {
        Self {
            first_moment: vec![0.0; num_parameters],
            second_moment: vec![0.0; num_parameters],
            step_count: 0,
        }
    }
}

/// One update of `params` in place.
pub fn optimizer_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut OptimizerState,
    hyper: &TrainingHyper,
) -> Result<()> {
    let n = params.len();
    if grad.len() != n || state.first_moment.len() != n || state.second_moment.len() != n {
        return Err(Error::structural(format!(
            "optimizer length mismatch: {n} parameters, {} gradient entries, {} moments",
            grad.len(),
            state.first_moment.len()
        )));
    }
    state.step_count += 1;
    let lr = hyper.learning_rate;
    match hyper.optimizer {
        Optimizer::Sgd => {
            for (w, g) in params.iter_mut().zip(grad) {
                *w -= lr * g;
            }
        }
        Optimizer::Adam => {
            let (b1, b2) = (hyper.adam_beta1, hyper.adam_beta2);
            let t = state.step_count as i32;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            for (((w, g), m), v) in params
                .iter_mut()
                .zip(grad)
                .zip(state.first_moment.iter_mut())
                .zip(state.second_moment.iter_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + hyper.adam_eps);
            }
        }
    }
    Ok(())
}
