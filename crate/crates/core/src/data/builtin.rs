use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Corpus, Dataset, LabeledSample};
use crate::error::{Error, Result};

const DIGITS_CSV: &str = include_str!("../../data/digits8x8.csv");

/// Training rows taken from the bundled digits set.
pub const DIGITS_TRAIN: usize = 1000;
/// Test rows taken right after the training rows.
pub const DIGITS_TEST: usize = 200;
/// Rows read from each on-disk MNIST-style subset split.
pub const SUBSET_TRAIN: usize = 1000;
pub const SUBSET_TEST: usize = 200;

/// Built-in datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builtin {
    /// 8×8 handwritten digits, 64 features in 0..=16, 10 classes.
    Digits8x8,
    /// Gaussian clusters with unit spread around centres drawn uniformly
    /// from `[−10, 10]^d`.
    SyntheticBlobs {
        num_classes: usize,
        feature_dim: usize,
        num_samples: usize,
        #[serde(default)]
        seed: u64,
    },
    MnistSubset,
    FashionSubset,
}

impl Builtin {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "digits8x8" => Ok(Builtin::Digits8x8),
            "synthetic_blobs" => Ok(Builtin::SyntheticBlobs {
                num_classes: 2,
                feature_dim: 4,
                num_samples: 200,
                seed: 0,
            }),
            "mnist_subset" => Ok(Builtin::MnistSubset),
            "fashion_subset" => Ok(Builtin::FashionSubset),
            other => Err(Error::config(format!(
                "unknown builtin dataset {other:?}; expected one of digits8x8, synthetic_blobs, mnist_subset, fashion_subset"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Builtin::Digits8x8 => "digits8x8",
            Builtin::SyntheticBlobs { .. } => "synthetic_blobs",
            Builtin::MnistSubset => "mnist_subset",
            Builtin::FashionSubset => "fashion_subset",
        }
    }
}

/// `$QFLSIM_DATA_DIR`, or `./data`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os("QFLSIM_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

pub fn load_builtin(builtin: &Builtin, data_dir: &Path) -> Result<Corpus> {
    match builtin {
        Builtin::Digits8x8 => digits(),
        &Builtin::SyntheticBlobs {
            num_classes,
            feature_dim,
            num_samples,
            seed,
        } => synthetic_blobs(num_classes, feature_dim, num_samples, seed).map(Corpus::from),
        Builtin::MnistSubset | Builtin::FashionSubset => {
            subset(builtin.label(), &data_dir.join(builtin.label()))
        }
    }
}

fn digits() -> Result<Corpus> {
    let mut samples = Vec::with_capacity(DIGITS_TRAIN + DIGITS_TEST);
    for line in DIGITS_CSV.lines().take(DIGITS_TRAIN + DIGITS_TEST) {
        let mut values: Vec<f64> = line
            .split(',')
            .map(|v| v.parse().expect("bundled digits data is numeric"))
            .collect();
        let label = values.pop().expect("bundled digits row has a label") as usize;
        samples.push(LabeledSample::new(values, label));
    }
    let test = samples.split_off(DIGITS_TRAIN);
    let names: Vec<String> = (0..10).map(|d| d.to_string()).collect();
    Ok(Corpus {
        train: Dataset::new("digits8x8/train", 10, samples, names.clone())?,
        test: Some(Dataset::new("digits8x8/test", 10, test, names)?),
    })
}

pub(crate) fn synthetic_blobs(
    num_classes: usize,
    feature_dim: usize,
    num_samples: usize,
    seed: u64,
) -> Result<Dataset> {
    if num_classes == 0 || feature_dim == 0 || num_samples < num_classes {
        return Err(Error::config(format!(
            "synthetic_blobs needs num_classes ≥ 1, feature_dim ≥ 1 and num_samples ≥ num_classes \
             (got {num_classes}, {feature_dim}, {num_samples})"
        )));
    }
    let mut rng = crate::rng::rng_from(seed, &[0xB10B]);
    let centers: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..feature_dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let samples = (0..num_samples)
        .map(|i| {
            let label = i % num_classes;
            let features = centers[label]
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + z
                })
                .collect();
            LabeledSample::new(features, label)
        })
        .collect();
    let names = (0..num_classes).map(|c| c.to_string()).collect();
    Dataset::new("synthetic_blobs", num_classes, samples, names)
}

fn subset(name: &str, dir: &Path) -> Result<Corpus> {
    let split = |prefix: &str, limit: usize| -> Result<Dataset> {
        let features_path = dir.join(format!("{prefix}_features.csv"));
        let labels_path = dir.join(format!("{prefix}_labels.csv"));
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|e| {
                Error::config(format!(
                    "{name}: cannot read {} ({e}); expected {}/{{train,test}}_{{features,labels}}.csv",
                    p.display(),
                    dir.display()
                ))
            })
        };
        let features = read(&features_path)?;
        let labels = read(&labels_path)?;
        let mut samples = Vec::with_capacity(limit);
        for (idx, (frow, lrow)) in features.lines().zip(labels.lines()).take(limit).enumerate() {
            let line = idx + 1;
            let values = frow
                .split(',')
                .enumerate()
                .map(|(col, v)| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        column: Some(col + 1),
                        message: format!("{}: non-numeric value {v:?}", features_path.display()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let label = lrow.trim().parse::<usize>().map_err(|_| Error::Parse {
                line,
                column: None,
                message: format!("{}: bad label {lrow:?}", labels_path.display()),
            })?;
            samples.push(LabeledSample::new(values, label));
        }
        let classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0).max(10);
        let names = (0..classes).map(|c| c.to_string()).collect();
        Dataset::new(format!("{name}/{prefix}"), classes, samples, names)
    };
    let train = split("train", SUBSET_TRAIN)?;
    let mut test = split("test", SUBSET_TEST)?;
    test.num_classes = train.num_classes.max(test.num_classes);
    Ok(Corpus {
        train,
        test: Some(test),
    })
}
