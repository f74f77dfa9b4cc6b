use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::check_class_capacity;
use crate::data::{
    load_builtin, load_csv, Builtin, Corpus, LabelColumn, PartitionMode, MAX_CLIENTS,
};
use crate::error::{Error, FieldError, Result};
use crate::learn::{Optimizer, TrainingHyper};
use crate::noise::NoiseSpec;
use crate::quantum::{Shots, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Framework {
    #[default]
    #[serde(rename = "QFL")]
    Qfl,
    #[serde(rename = "CLASSICAL_FL")]
    ClassicalFl,
}

/// Where a run's samples come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetRef {
    Builtin(Builtin),
    Csv(CsvSource),
    /// A CSV previously stored through the upload endpoint.
    Uploaded(UploadedSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default)]
    pub label_column: LabelColumn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadedSource {
    pub id: String,
}

impl<'de> Deserialize<'de> for DatasetRef {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(de)?;
        let obj = value
            .as_object()
            .ok_or_else(|| D::Error::custom("dataset must be an object"))?;
        let source = obj
            .get("source")
            .and_then(|v| v.as_str())
            .ok_or_else(|| D::Error::missing_field("source"))?;
        let allowed: &[&str] = match (source, obj.get("name").and_then(|v| v.as_str())) {
            ("builtin", Some("synthetic_blobs")) => {
                &["source", "name", "num_classes", "feature_dim", "num_samples", "seed"]
            }
            ("builtin", _) => &["source", "name"],
            ("csv", _) => &["source", "path", "label_column"],
            ("uploaded", _) => &["source", "id"],
            (other, _) => {
                return Err(D::Error::unknown_variant(other, &["builtin", "csv", "uploaded"]));
            }
        };
        if let Some(extra) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(D::Error::unknown_field(extra, allowed));
        }
        let mut rest = obj.clone();
        rest.remove("source");
        let rest = serde_json::Value::Object(rest);
        match source {
            "builtin" => Builtin::deserialize(rest).map(DatasetRef::Builtin),
            "csv" => CsvSource::deserialize(rest).map(DatasetRef::Csv),
            _ => UploadedSource::deserialize(rest).map(DatasetRef::Uploaded),
        }
        .map_err(D::Error::custom)
    }
}

impl Default for DatasetRef {
    fn default() -> Self {
        DatasetRef::Builtin(Builtin::Digits8x8)
    }
}

/// Directories used to resolve [`DatasetRef`]s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSources {
    pub data_dir: PathBuf,
    pub upload_dir: Option<PathBuf>,
}

impl Default for DataSources {
    fn default() -> Self {
        Self {
            data_dir: crate::data::default_data_dir(),
            upload_dir: None,
        }
    }
}

/// Sidecar stored next to an uploaded CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadMeta {
    pub label_column: LabelColumn,
    pub file_name: String,
}

pub fn upload_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{id}.csv")), dir.join(format!("{id}.json")))
}

impl DatasetRef {
    pub fn load(&self, sources: &DataSources) -> Result<Corpus> {
        match self {
            DatasetRef::Builtin(b) => load_builtin(b, &sources.data_dir),
            DatasetRef::Csv(CsvSource { path, label_column }) => load_csv(path, label_column).map(Corpus::from),
            DatasetRef::Uploaded(UploadedSource { id }) => {
                if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                    return Err(Error::config(format!("invalid dataset id {id:?}")));
                }
                let dir = sources
                    .upload_dir
                    .as_deref()
                    .ok_or_else(|| Error::config("uploaded datasets are only available in the service"))?;
                let (csv_path, meta_path) = upload_paths(dir, id);
                let meta: UploadMeta = serde_json::from_slice(
                    &std::fs::read(&meta_path).map_err(|_| Error::config(format!("unknown dataset id {id}")))?,
                )?;
                let mut d = load_csv(&csv_path, &meta.label_column)?;
                d.name = meta.file_name;
                Ok(d.into())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub mode: PartitionMode,
    pub shards_per_client: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            mode: PartitionMode::Iid,
            shards_per_client: 2,
        }
    }
}

/// Complete description of a run. Serialized as one flat JSON document;
/// unknown fields are rejected. `num_qubits` and `num_layers` are required
/// for QFL and forbidden for classical FL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub framework: Framework,
    pub dataset: DatasetRef,
    pub num_clients: usize,
    pub global_rounds: usize,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_qubits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_layers: Option<usize>,
    pub shots: Shots,
    pub optimizer: Optimizer,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub partition: PartitionConfig,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Held-out share when the dataset has no predefined test split.
    pub test_fraction: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let hyper = TrainingHyper::default();
        Self {
            framework: Framework::Qfl,
            dataset: DatasetRef::default(),
            num_clients: 5,
            global_rounds: 20,
            local_epochs: hyper.local_epochs,
            learning_rate: hyper.learning_rate,
            batch_size: hyper.batch_size,
            num_qubits: Some(4),
            num_layers: Some(2),
            shots: Shots::Exact,
            optimizer: hyper.optimizer,
            adam_beta1: hyper.adam_beta1,
            adam_beta2: hyper.adam_beta2,
            adam_eps: hyper.adam_eps,
            partition: PartitionConfig::default(),
            noise: NoiseSpec::default(),
            seed: 0,
            test_fraction: 0.2,
        }
    }
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(vec![json_field_error(&e)]))
    }

    pub fn hyper(&self) -> TrainingHyper {
        TrainingHyper {
            learning_rate: self.learning_rate,
            local_epochs: self.local_epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
        }
    }

    /// Every violated field. Zero rounds and zero local epochs are accepted
    /// as degenerate runs.
    pub fn violations(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        if self.num_clients == 0 || self.num_clients > MAX_CLIENTS {
            errs.push(FieldError::new(
                "num_clients",
                format!("must be in 1..={MAX_CLIENTS} (up to {MAX_CLIENTS} clients)"),
            ));
        }
        errs.extend(self.hyper().violations());
        match self.framework {
            Framework::Qfl => {
                match self.num_qubits {
                    None => errs.push(FieldError::new("num_qubits", "required for framework QFL")),
                    Some(q) if q == 0 || q > MAX_QUBITS => errs.push(FieldError::new(
                        "num_qubits",
                        format!("must be in 1..={MAX_QUBITS}"),
                    )),
                    _ => {}
                }
                match self.num_layers {
                    None => errs.push(FieldError::new("num_layers", "required for framework QFL")),
                    Some(0) => errs.push(FieldError::new("num_layers", "must be at least 1")),
                    _ => {}
                }
            }
            Framework::ClassicalFl => {
                for (field, v) in [("num_qubits", self.num_qubits), ("num_layers", self.num_layers)] {
                    if v.is_some() {
                        errs.push(FieldError::new(field, "only valid for framework QFL"));
                    }
                }
            }
        }
        if self.shots == Shots::Finite(0) {
            errs.push(FieldError::new("shots", "must be at least 1 or \"EXACT\""));
        }
        if self.partition.mode == PartitionMode::NonIidLabelSkew && self.partition.shards_per_client == 0 {
            errs.push(FieldError::new("partition.shards_per_client", "must be at least 1"));
        }
        errs.extend(self.noise.violations());
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            errs.push(FieldError::new("test_fraction", "must lie strictly between 0 and 1"));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Checks that the config can run on `corpus`.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        let mut errs = Vec::new();
        let classes = corpus.train.num_classes;
        if let (Framework::Qfl, Some(q)) = (self.framework, self.num_qubits) {
            if let Err(e) = check_class_capacity(classes, q) {
                errs.push(FieldError::new("num_qubits", strip_prefix(&e)));
            }
        }
        let available = if corpus.test.is_some() {
            corpus.train.len()
        } else {
            corpus.train.len() - ((corpus.train.len() as f64) * self.test_fraction).round() as usize
        };
        if self.num_clients > available {
            errs.push(FieldError::new(
                "num_clients",
                format!("exceeds the {available} training samples"),
            ));
        } else if self.partition.mode == PartitionMode::NonIidLabelSkew
            && self.num_clients * self.partition.shards_per_client > available
        {
            errs.push(FieldError::new(
                "partition.shards_per_client",
                format!("num_clients × shards_per_client exceeds the {available} training samples"),
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Best-effort mapping of a serde error onto the offending field.
pub(crate) fn json_field_error(e: &serde_json::Error) -> FieldError {
    let msg = e.to_string();
    let field = ["unknown field `", "missing field `", "unknown variant `"]
        .iter()
        .find_map(|pat| {
            let start = msg.find(pat)? + pat.len();
            let end = msg[start..].find('`')? + start;
            Some(msg[start..end].to_string())
        })
        .filter(|_| !msg.contains("unknown variant"))
        .unwrap_or_else(|| "body".into());
    FieldError::new(field, msg)
}
