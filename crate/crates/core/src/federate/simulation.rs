//! The round loop: broadcast, local training, weighted aggregation,
//! evaluation, metric emission.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::aggregate;
use super::config::{Framework, SimulationConfig};
use super::evaluate::{evaluate, EvalSettings};
use super::model::Model;
use crate::circuit::{CircuitSpec, ClassMapping};
use crate::data::{partition, Corpus, Dataset, LabeledSample, PartitionPlan, Preprocessor};
use crate::error::{Error, Result};
use crate::learn::{SoftmaxModel, TrainingHyper};
use crate::rng::{rng_from, stream};

/// Server-held parameters after `round` completed rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub parameters: Vec<f64>,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub client_id: usize,
    /// Indices into the preprocessed training split.
    pub shard: Vec<usize>,
    pub parameters: Vec<f64>,
}

/// Metrics of one completed round. Rounds are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub test_loss: f64,
    pub test_accuracy: f64,
    /// Last local mini-batch loss of each client, in client order. `None`
    /// when no local epochs ran.
    pub per_client_final_train_loss: Vec<Option<f64>>,
    /// Every local epoch's mini-batch loss, per client.
    pub per_client_epoch_losses: Vec<Vec<f64>>,
    pub mean_client_loss: Option<f64>,
    pub wall_time_ms: u64,
}

/// Receives each round's metrics as soon as the round completes.
pub trait MetricSink {
    fn record(&mut self, metrics: &RoundMetrics);
}

impl<F: FnMut(&RoundMetrics)> MetricSink for F {
    fn record(&mut self, metrics: &RoundMetrics) {
        self(metrics)
    }
}

impl MetricSink for Vec<RoundMetrics> {
    fn record(&mut self, metrics: &RoundMetrics) {
        self.push(metrics.clone());
    }
}

/// Execution knobs that do not change results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for client training; `None` uses the global pool.
    pub client_threads: Option<usize>,
    /// When false, `wall_time_ms` is reported as 0 so exported metrics are
    /// byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            client_threads: None,
            record_wall_time: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub global: GlobalModel,
    pub history: Vec<RoundMetrics>,
    pub cancelled: bool,
}

pub struct Simulation {
    config: SimulationConfig,
    hyper: TrainingHyper,
    model: Model,
    train: Dataset,
    test: Dataset,
    clients: Vec<ClientState>,
    global: GlobalModel,
    history: Vec<RoundMetrics>,
    options: RunOptions,
    pool: Option<rayon::ThreadPool>,
}

impl Simulation {
    /// Setup phase: validation, split, scaling, partitioning and parameter
    /// initialization.
    pub fn new(config: SimulationConfig, corpus: Corpus, options: RunOptions) -> Result<Self> {
        config.validate()?;
        config.check_corpus(&corpus)?;

        let (train_raw, test_raw) = match corpus.test {
            Some(test) => (corpus.train, test),
            None => {
                let mut rng = rng_from(config.seed, &[stream::SPLIT]);
                corpus.train.split(config.test_fraction, &mut rng)?
            }
        };
        let num_classes = train_raw.num_classes.max(test_raw.num_classes);

        let (model, prep) = match config.framework {
            Framework::Qfl => {
                let q = config.num_qubits.unwrap_or_default();
                let spec = CircuitSpec::build(q, config.num_layers.unwrap_or_default())?;
                let mapping = ClassMapping::new(num_classes, q)?;
                (Model::Quantum { spec, mapping }, Preprocessor::for_qubits(&train_raw, q)?)
            }
            Framework::ClassicalFl => (
                Model::Classical(SoftmaxModel::new(num_classes, train_raw.feature_dim)?),
                Preprocessor::scaling_only(&train_raw),
            ),
        };
        let train = prep.apply(&train_raw);
        let test = prep.apply(&test_raw);

        let shards = partition(
            &train,
            &PartitionPlan {
                mode: config.partition.mode,
                num_clients: config.num_clients,
                shards_per_client: config.partition.shards_per_client,
                seed: config.seed,
            },
        )?;
        let mut init_rng = rng_from(config.seed, &[stream::INIT]);
        let parameters = model.init_parameters(&mut init_rng);
        let clients = shards
            .into_iter()
            .enumerate()
            .map(|(client_id, shard)| ClientState {
                client_id,
                shard,
                parameters: parameters.clone(),
            })
            .collect();

        let pool = options
            .client_threads
            .map(|n| rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build())
            .transpose()
            .map_err(|e| Error::config(format!("cannot start client thread pool: {e}")))?;

        Ok(Self {
            hyper: config.hyper(),
            config,
            model,
            train,
            test,
            clients,
            global: GlobalModel { parameters, round: 0 },
            history: Vec::new(),
            options,
            pool,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn global(&self) -> &GlobalModel {
        &self.global
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn train_split(&self) -> &Dataset {
        &self.train
    }

    pub fn test_split(&self) -> &Dataset {
        &self.test
    }

    pub fn history(&self) -> &[RoundMetrics] {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        self.global.round >= self.config.global_rounds
    }

    /// Runs one round. Any client failure aborts the round before
    /// aggregation and leaves the global model untouched.
    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        let started = Instant::now();
        let round = self.global.round + 1;
        let seed = self.config.seed;

        // Broadcast: every client receives its own copy of the global vector.
        for client in &mut self.clients {
            client.parameters = self.global.parameters.clone();
        }

        let (model, hyper, train) = (&self.model, &self.hyper, &self.train);
        let clients = &self.clients;
        let work = || {
            clients
                .par_iter()
                .map(|client| {
                    let data: Vec<&LabeledSample> = client.shard.iter().map(|&i| &train.samples[i]).collect();
                    let mut rng = rng_from(seed, &[stream::CLIENT, client.client_id as u64, round as u64]);
                    model
                        .train(&data, &client.parameters, hyper, &mut rng)
                        .map_err(|e| Error::Client {
                            round,
                            client: client.client_id,
                            source: Box::new(e),
                        })
                })
                .collect::<Vec<_>>()
        };
        let results = match &self.pool {
            Some(pool) => pool.install(work),
            None => work(),
        };
        let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;

        let sizes: Vec<usize> = self.clients.iter().map(|c| c.shard.len()).collect();
        let params: Vec<&[f64]> = outcomes.iter().map(|o| o.params.as_slice()).collect();
        let aggregated = aggregate(&params, &sizes)?;

        let settings = EvalSettings {
            noise: self.config.noise,
            shots: self.config.shots,
            seed,
        };
        let (test_loss, test_accuracy) = evaluate(&self.model, &aggregated, &self.test, &settings, round)?;

        for (client, outcome) in self.clients.iter_mut().zip(&outcomes) {
            client.parameters = outcome.params.clone();
        }
        self.global = GlobalModel {
            parameters: aggregated,
            round,
        };

        let finals: Vec<Option<f64>> = outcomes.iter().map(|o| o.epoch_losses.last().copied()).collect();
        let mean_client_loss = finals
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64);
        let metrics = RoundMetrics {
            round,
            test_loss,
            test_accuracy,
            per_client_final_train_loss: finals,
            per_client_epoch_losses: outcomes.into_iter().map(|o| o.epoch_losses).collect(),
            mean_client_loss,
            wall_time_ms: if self.options.record_wall_time {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
        };
        self.history.push(metrics.clone());
        Ok(metrics)
    }

    /// Runs the remaining rounds, handing each round's metrics to `sink`.
    /// A raised `cancel` flag stops the loop at the next round boundary.
    pub fn run(&mut self, sink: &mut dyn MetricSink, cancel: Option<&AtomicBool>) -> Result<SimulationOutcome> {
        let mut cancelled = false;
        while !self.is_finished() {
            if cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
                cancelled = true;
                break;
            }
            let metrics = self.run_round()?;
            sink.record(&metrics);
        }
        Ok(SimulationOutcome {
            global: self.global.clone(),
            history: self.history.clone(),
            cancelled,
        })
    }
}

/// Sets up and runs a whole simulation.
pub fn run_simulation(
    config: &SimulationConfig,
    corpus: Corpus,
    sink: &mut dyn MetricSink,
    options: RunOptions,
    cancel: Option<Arc<AtomicBool>>,
) -> Result<SimulationOutcome> {
    let mut sim = Simulation::new(config.clone(), corpus, options)?;
    sim.run(sink, cancel.as_deref())
}
