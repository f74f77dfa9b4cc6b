use std::borrow::Borrow;

use rand::seq::SliceRandom;
use rand::Rng;

use super::gradient::loss_and_gradient;
use super::optim::{optimizer_step, OptimizerState};
use super::{LabeledSample, TrainingHyper};
use crate::circuit::{CircuitSpec, ClassMapping};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub params: Vec<f64>,
    /// Mini-batch loss of each epoch, measured before that epoch's update.
    pub epoch_losses: Vec<f64>,
}

/// Draws one mini-batch without replacement from a fresh shuffle.
pub(crate) fn sample_batch<'a, S, R>(data: &'a [S], batch_size: usize, rng: &mut R) -> Vec<&'a LabeledSample>
where
    S: Borrow<LabeledSample>,
    R: Rng + ?Sized,
{
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    order.truncate(batch_size.min(data.len()));
    order.into_iter().map(|i| data[i].borrow()).collect()
}

/// `K` epochs of mini-batch parameter-shift training from `init`, starting
/// from fresh optimizer state.
pub fn local_train<S, R>(
    data: &[S],
    init: &[f64],
    spec: &CircuitSpec,
    mapping: &ClassMapping,
    hyper: &TrainingHyper,
    rng: &mut R,
) -> Result<LocalOutcome>
where
    S: Borrow<LabeledSample> + Sync,
    R: Rng + ?Sized,
{
    if data.is_empty() {
        return Err(Error::config("client shard is empty"));
    }
    spec.check_params(init)?;
    let mut params = init.to_vec();
    let mut state = OptimizerState::new(params.len());
    let mut epoch_losses = Vec::with_capacity(hyper.local_epochs);
    for _ in 0..hyper.local_epochs {
        let batch = sample_batch(data, hyper.batch_size, rng);
        let (loss, grad) = loss_and_gradient(spec, &params, mapping, &batch)?;
        optimizer_step(&mut params, &grad, &mut state, hyper)?;
        epoch_losses.push(loss);
    }
    Ok(LocalOutcome {
        params,
        epoch_losses,
    })
}
