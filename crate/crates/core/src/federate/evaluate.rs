use rayon::prelude::*;

use super::model::Model;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learn::cross_entropy;
use crate::noise::{apply_noise, NoiseSpec};
use crate::quantum::{sample_distribution, Shots};
use crate::rng::{rng_from, stream};

/// Readout settings applied at evaluation time only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub noise: NoiseSpec,
    pub shots: Shots,
    pub seed: u64,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate().skip(1) {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy and argmax accuracy of class distributions against
/// labels.
pub fn score<P: AsRef<[f64]>>(predictions: &[P], labels: &[usize]) -> Result<(f64, f64)> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::structural(format!(
            "cannot score {} predictions against {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (p, &y) in predictions.iter().zip(labels) {
        let p = p.as_ref();
        loss += cross_entropy(p, y)?;
        correct += usize::from(argmax(p) == y);
    }
    let n = labels.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Test loss and accuracy of `params` on `test`.
pub fn evaluate(model: &Model, params: &[f64], test: &Dataset, settings: &EvalSettings, round: usize) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::config("test split is empty"));
    }
    let predictions = test
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| match model {
            Model::Quantum { spec, mapping } => {
                let mut outcomes = crate::circuit::outcome_probs(spec, params, &s.features)?;
                if settings.noise.is_active() {
                    outcomes = apply_noise(&outcomes, &settings.noise)?;
                }
                if let Shots::Finite(m) = settings.shots {
                    let mut rng = rng_from(settings.seed, &[stream::EVAL, round as u64, i as u64]);
                    outcomes = sample_distribution(&outcomes, m, &mut rng)?;
                }
                Ok(mapping.class_probs(&outcomes))
            }
            Model::Classical(m) => m.predict_probs(params, &s.features),
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = test.samples.iter().map(|s| s.label).collect();
    score(&predictions, &labels)
}
