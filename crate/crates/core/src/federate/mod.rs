//! Federated orchestration.

mod aggregate;
mod config;
mod evaluate;
mod model;
mod simulation;

pub use aggregate::aggregate;
pub use config::{
    upload_paths, CsvSource, DataSources, DatasetRef, Framework, PartitionConfig, SimulationConfig, UploadMeta,
    UploadedSource,
};
pub(crate) use config::json_field_error;
pub use evaluate::{argmax, evaluate, score, EvalSettings};
pub use model::Model;
pub use simulation::{
    run_simulation, ClientState, GlobalModel, MetricSink, RoundMetrics, RunOptions, Simulation,
    SimulationOutcome,
};
