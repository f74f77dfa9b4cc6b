use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::Result;
use crate::quantum::check_qubits;

/// Per-feature minimum and maximum from a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingStats {
    pub fn fit(dataset: &Dataset) -> Self {
        let d = dataset.feature_dim;
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for s in &dataset.samples {
            for ((lo, hi), &x) in min.iter_mut().zip(max.iter_mut()).zip(&s.features) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        Self { min, max }
    }

    /// `(x − min)/(max − min)`; constant features map to 0.
    pub fn scale(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}

/// Min-max scaling fitted on training data, optionally followed by
/// truncation or zero-padding to a fixed width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub stats: ScalingStats,
    pub width: Option<usize>,
}

impl Preprocessor {
    /// Width `2^Q` for amplitude encoding.
    pub fn for_qubits(train: &Dataset, num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        Ok(Self {
            stats: ScalingStats::fit(train),
            width: Some(1 << num_qubits),
        })
    }

    /// Scaling only, for the classical model.
    pub fn scaling_only(train: &Dataset) -> Self {
        Self {
            stats: ScalingStats::fit(train),
            width: None,
        }
    }

    pub fn apply(&self, dataset: &Dataset) -> Dataset {
        if let Some(w) = self.width {
            if dataset.feature_dim > w {
                log::warn!(
                    "{}: truncating {} features to {w}; trailing features are discarded",
                    dataset.name,
                    dataset.feature_dim
                );
            }
        }
        let samples = dataset
            .samples
            .iter()
            .map(|s| {
                let mut f = self.stats.scale(&s.features);
                if let Some(w) = self.width {
                    f.resize(w, 0.0);
                }
                crate::learn::LabeledSample::new(f, s.label)
            })
            .collect();
        dataset.with_samples(dataset.name.clone(), samples)
    }
}

/// Scales `dataset` with its own statistics and fits it to `2^Q` features.
pub fn preprocess(dataset: &Dataset, num_qubits: usize) -> Result<Dataset> {
    Ok(Preprocessor::for_qubits(dataset, num_qubits)?.apply(dataset))
}
