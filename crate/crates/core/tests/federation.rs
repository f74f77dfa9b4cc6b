use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use qflsim::circuit::{CircuitSpec, ClassMapping};
use qflsim::data::{Builtin, PartitionMode};
use qflsim::federate::{
    aggregate, run_simulation, DataSources, DatasetRef, Framework, PartitionConfig, RoundMetrics, RunOptions,
    Simulation, SimulationConfig,
};
use qflsim::learn::{local_train, LabeledSample};
use qflsim::noise::NoiseSpec;
use qflsim::quantum::Shots;
use qflsim::rng::{rng_from, stream};

fn blobs(clients: usize, rounds: usize) -> SimulationConfig {
    SimulationConfig {
        dataset: DatasetRef::Builtin(Builtin::SyntheticBlobs {
            num_classes: 3,
            feature_dim: 4,
            num_samples: 150,
            seed: 9,
        }),
        num_qubits: Some(2),
        num_layers: Some(2),
        num_clients: clients,
        global_rounds: rounds,
        seed: 11,
        ..SimulationConfig::default()
    }
}

fn simulation(config: &SimulationConfig) -> Simulation {
    let corpus = config.dataset.load(&DataSources::default()).unwrap();
    let options = RunOptions {
        record_wall_time: false,
        ..RunOptions::default()
    };
    Simulation::new(config.clone(), corpus, options).unwrap()
}

#[test]
fn single_client_equals_repeated_local_training() {
    let config = blobs(1, 4);
    let mut sim = simulation(&config);
    let shard: Vec<LabeledSample> = sim.clients()[0]
        .shard
        .iter()
        .map(|&i| sim.train_split().samples[i].clone())
        .collect();
    let spec = CircuitSpec::build(2, 2).unwrap();
    let mapping = ClassMapping::new(3, 2).unwrap();
    let hyper = config.hyper();

    let mut params = sim.global().parameters.clone();
    for round in 1..=config.global_rounds {
        let mut rng = rng_from(config.seed, &[stream::CLIENT, 0, round as u64]);
        params = local_train(&shard, &params, &spec, &mapping, &hyper, &mut rng).unwrap().params;
    }
    let outcome = sim.run(&mut Vec::new(), None).unwrap();
    assert_eq!(outcome.global.parameters, params);
    assert_eq!(outcome.global.round, 4);
}

#[test]
fn zero_learning_rate_keeps_global() {
    let config = SimulationConfig {
        learning_rate: 0.0,
        ..blobs(3, 2)
    };
    let mut sim = simulation(&config);
    let before = sim.global().parameters.clone();
    sim.run_round().unwrap();
    assert_eq!(sim.global().parameters, before);
}

#[test]
fn zero_rounds_returns_initial_parameters() {
    let config = blobs(2, 0);
    let sim = simulation(&config);
    let init = sim.global().parameters.clone();
    let corpus = config.dataset.load(&DataSources::default()).unwrap();
    let mut history: Vec<RoundMetrics> = Vec::new();
    let out = run_simulation(&config, corpus, &mut history, RunOptions::default(), None).unwrap();
    assert_eq!(out.global.parameters, init);
    assert!(out.history.is_empty() && history.is_empty());
}

#[test]
fn zero_local_epochs_report_no_client_loss() {
    let mut sim = simulation(&SimulationConfig {
        local_epochs: 0,
        ..blobs(2, 1)
    });
    let before = sim.global().parameters.clone();
    let m = sim.run_round().unwrap();
    assert_eq!(m.per_client_final_train_loss, vec![None, None]);
    assert_eq!(m.mean_client_loss, None);
    assert_eq!(sim.global().parameters, before);
}

#[test]
fn identical_clients_aggregate_to_either() {
    let config = blobs(2, 1);
    let sim = simulation(&config);
    let shard: Vec<&LabeledSample> = sim.train_split().samples.iter().take(20).collect();
    let spec = CircuitSpec::build(2, 2).unwrap();
    let mapping = ClassMapping::new(3, 2).unwrap();
    let init = sim.global().parameters.clone();
    let train = || {
        let mut rng = rng_from(5, &[stream::CLIENT, 0, 1]);
        local_train(&shard, &init, &spec, &mapping, &config.hyper(), &mut rng).unwrap().params
    };
    let (a, b) = (train(), train());
    assert_eq!(a, b);
    assert_eq!(aggregate(&[a.clone(), b], &[20, 20]).unwrap(), a);
}

#[test]
fn metrics_stream_once_per_round() {
    let config = blobs(3, 3);
    let corpus = config.dataset.load(&DataSources::default()).unwrap();
    let mut seen = Vec::new();
    let mut sink = |m: &RoundMetrics| seen.push(m.round);
    let out = run_simulation(&config, corpus, &mut sink, RunOptions::default(), None).unwrap();
    assert_eq!(seen, vec![1, 2, 3]);
    for m in &out.history {
        assert_eq!(m.per_client_final_train_loss.len(), 3);
        assert_eq!(m.per_client_epoch_losses.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 3]);
        assert!((0.0..=1.0).contains(&m.test_accuracy));
    }
}

#[test]
fn history_independent_of_thread_count() {
    let config = blobs(5, 3);
    let run = |threads| {
        let corpus = config.dataset.load(&DataSources::default()).unwrap();
        let options = RunOptions {
            client_threads: Some(threads),
            record_wall_time: false,
        };
        run_simulation(&config, corpus, &mut Vec::new(), options, None).unwrap()
    };
    let (a, b) = (run(1), run(5));
    assert_eq!(a.history, b.history);
    assert_eq!(a.global, b.global);
}

#[test]
fn cancellation_stops_at_round_boundary() {
    let config = blobs(2, 10);
    let corpus = config.dataset.load(&DataSources::default()).unwrap();
    let flag = Arc::new(AtomicBool::new(false));
    let setter = flag.clone();
    let mut sink = move |m: &RoundMetrics| {
        if m.round == 2 {
            setter.store(true, Ordering::SeqCst);
        }
    };
    let out = run_simulation(&config, corpus, &mut sink, RunOptions::default(), Some(flag)).unwrap();
    assert!(out.cancelled);
    assert_eq!(out.history.len(), 2);
    assert_eq!(out.global.round, 2);
}

#[test]
fn non_iid_and_classical_runs_complete() {
    let skewed = SimulationConfig {
        partition: PartitionConfig {
            mode: PartitionMode::NonIidLabelSkew,
            shards_per_client: 2,
        },
        ..blobs(4, 2)
    };
    assert_eq!(simulation(&skewed).run(&mut Vec::new(), None).unwrap().history.len(), 2);

    let classical = SimulationConfig {
        framework: Framework::ClassicalFl,
        num_qubits: None,
        num_layers: None,
        learning_rate: 0.1,
        ..blobs(4, 5)
    };
    let mut sim = simulation(&classical);
    assert_eq!(sim.global().parameters.len(), 3 * 4 + 3);
    let out = sim.run(&mut Vec::new(), None).unwrap();
    assert!(out.history[4].test_accuracy > 0.5);
}

#[test]
fn noisy_finite_shot_evaluation_differs_from_exact() {
    let exact = blobs(2, 2);
    let noisy = SimulationConfig {
        shots: Shots::Finite(64),
        noise: NoiseSpec {
            enabled: true,
            depolarizing_p: 0.2,
            readout_flip_p: 0.05,
        },
        ..exact.clone()
    };
    let a = simulation(&exact).run(&mut Vec::new(), None).unwrap();
    let b = simulation(&noisy).run(&mut Vec::new(), None).unwrap();
    // Training is noise-free, so the parameters agree.
    assert_eq!(a.global.parameters, b.global.parameters);
    assert_ne!(a.history[1].test_loss, b.history[1].test_loss);
    let again = simulation(&noisy).run(&mut Vec::new(), None).unwrap();
    assert_eq!(again.history, b.history);
}

#[test]
fn setup_rejects_incompatible_corpus() {
    let config = SimulationConfig {
        dataset: DatasetRef::Builtin(Builtin::Digits8x8),
        num_qubits: Some(3),
        ..SimulationConfig::default()
    };
    let corpus = config.dataset.load(&DataSources::default()).unwrap();
    let err = Simulation::new(config, corpus, RunOptions::default()).err().unwrap().to_string();
    assert!(err.contains("num_classes 10 exceeds 2^Q = 8"), "{err}");
}
