//! Datasets: built-in sets, CSV ingestion, scaling and client partitioning.

mod builtin;
mod csv;
mod partition;
mod preprocess;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::learn::LabeledSample;

pub use self::csv::{load_csv, load_csv_bytes, LabelColumn, MAX_CSV_BYTES};
pub use builtin::{default_data_dir, load_builtin, Builtin, DIGITS_TEST, DIGITS_TRAIN, SUBSET_TEST, SUBSET_TRAIN};
pub use partition::{partition, PartitionMode, PartitionPlan, MAX_CLIENTS};
pub use preprocess::{preprocess, Preprocessor, ScalingStats};

/// A labelled sample set with consistent feature width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub samples: Vec<LabeledSample>,
    /// Original label text for each class index, when labels were remapped.
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        num_classes: usize,
        samples: Vec<LabeledSample>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        let feature_dim = samples
            .first()
            .map(|s| s.features.len())
            .ok_or_else(|| Error::config(format!("dataset {name} is empty")))?;
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::structural(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if s.label >= num_classes {
                return Err(Error::structural(format!(
                    "sample {i} has label {} but only {num_classes} classes",
                    s.label
                )));
            }
        }
        Ok(Self {
            name,
            num_classes,
            feature_dim,
            samples,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Seeded shuffle, then the last `test_fraction` of samples become the
    /// test split.
    pub fn split<R: Rng + ?Sized>(&self, test_fraction: f64, rng: &mut R) -> Result<(Dataset, Dataset)> {
        let n = self.len();
        let n_test = ((n as f64) * test_fraction).round() as usize;
        if n_test == 0 || n_test >= n {
            return Err(Error::config(format!(
                "test fraction {test_fraction} leaves an empty split of {n} samples"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let pick = |idx: &[usize]| idx.iter().map(|&i| self.samples[i].clone()).collect();
        let (train_idx, test_idx) = order.split_at(n - n_test);
        Ok((
            self.with_samples(format!("{}/train", self.name), pick(train_idx)),
            self.with_samples(format!("{}/test", self.name), pick(test_idx)),
        ))
    }

    pub(crate) fn with_samples(&self, name: String, samples: Vec<LabeledSample>) -> Dataset {
        Dataset {
            name,
            num_classes: self.num_classes,
            feature_dim: samples.first().map_or(self.feature_dim, |s| s.features.len()),
            samples,
            label_names: self.label_names.clone(),
        }
    }
}

/// Training data with an optional predefined held-out split.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

impl From<Dataset> for Corpus {
    fn from(train: Dataset) -> Self {
        Corpus { train, test: None }
    }
}
