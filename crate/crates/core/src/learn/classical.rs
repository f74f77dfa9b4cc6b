//! Softmax-regression baseline for classical federated runs.

use std::borrow::Borrow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::cross_entropy;
use super::optim::{optimizer_step, OptimizerState};
use super::train::{sample_batch, LocalOutcome};
use super::{LabeledSample, TrainingHyper};
use crate::error::{Error, Result};

/// Linear softmax classifier. Parameters are the `C×d` weight matrix in
/// row-major order followed by the `C` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl SoftmaxModel {
    pub fn new(num_classes: usize, feature_dim: usize) -> Result<Self> {
        if num_classes == 0 || feature_dim == 0 {
            return Err(Error::config(
                "softmax model needs at least one class and one feature",
            ));
        }
        Ok(Self {
            num_classes,
            feature_dim,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.num_classes * (self.feature_dim + 1)
    }

    pub fn init_parameters<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.num_parameters())
            .map(|_| rng.random_range(-0.01..=0.01))
            .collect()
    }

    fn check(&self, params: &[f64], features: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::structural(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                params.len()
            )));
        }
        if features.len() != self.feature_dim {
            return Err(Error::structural(format!(
                "expected {} features, got {}",
                self.feature_dim,
                features.len()
            )));
        }
        Ok(())
    }

    pub fn predict_probs(&self, params: &[f64], features: &[f64]) -> Result<Vec<f64>> {
        self.check(params, features)?;
        let (weights, bias) = params.split_at(self.num_classes * self.feature_dim);
        let logits: Vec<f64> = weights
            .chunks_exact(self.feature_dim)
            .zip(bias)
            .map(|(row, b)| b + row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>())
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }

    pub fn batch_loss<S: Borrow<LabeledSample>>(&self, params: &[f64], batch: &[S]) -> Result<f64> {
        self.loss_and_gradient(params, batch).map(|(l, _)| l)
    }

    /// Mean cross-entropy and its analytic gradient `(softmax − onehot) ⊗ [x, 1]`.
    pub fn loss_and_gradient<S: Borrow<LabeledSample>>(
        &self,
        params: &[f64],
        batch: &[S],
    ) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::structural("empty batch"));
        }
        let d = self.feature_dim;
        let bias_offset = self.num_classes * d;
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for sample in batch {
            let sample = sample.borrow();
            let probs = self.predict_probs(params, &sample.features)?;
            loss += cross_entropy(&probs, sample.label)?;
            for (class, p) in probs.iter().enumerate() {
                let delta = p - if class == sample.label { 1.0 } else { 0.0 };
                for (g, x) in grad[class * d..(class + 1) * d].iter_mut().zip(&sample.features) {
                    *g += delta * x;
                }
                grad[bias_offset + class] += delta;
            }
        }
        let n = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }
}

/// Local training for the classical baseline; same batching and optimizer
/// machinery as [`local_train`](super::local_train).
pub fn classical_local_train<S, R>(
    data: &[S],
    init: &[f64],
    model: &SoftmaxModel,
    hyper: &TrainingHyper,
    rng: &mut R,
) -> Result<LocalOutcome>
where
    S: Borrow<LabeledSample>,
    R: Rng + ?Sized,
{
    if data.is_empty() {
        return Err(Error::config("client shard is empty"));
    }
    let mut params = init.to_vec();
    let mut state = OptimizerState::new(params.len());
    let mut epoch_losses = Vec::with_capacity(hyper.local_epochs);
    for _ in 0..hyper.local_epochs {
        let batch = sample_batch(data, hyper.batch_size, rng);
        let (loss, grad) = model.loss_and_gradient(&params, &batch)?;
        optimizer_step(&mut params, &grad, &mut state, hyper)?;
        epoch_losses.push(loss);
    }
    Ok(LocalOutcome {
        params,
        epoch_losses,
    })
}
