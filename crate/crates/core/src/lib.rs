//! Quantum federated learning simulator.
//!
//! Clients amplitude-encode their local samples, train a layered
//! parameterized circuit with parameter-shift gradients, and a server merges
//! their parameters by dataset-size-weighted averaging each round.
//!
//! * [`quantum`]: state vectors, gates, measurement
//! * [`circuit`]: the ansatz and class readout
//! * [`learn`]: loss, gradients, optimizers, local training
//! * [`noise`]: measurement-level noise
//! * [`data`]: datasets and client partitioning
//! * [`federate`]: rounds, aggregation, evaluation, whole simulations
//! * [`interface`]: config schema, run registry, HTTP service, CLI

pub mod circuit;
pub mod data;
pub mod error;
pub mod federate;
pub mod interface;
pub mod learn;
pub mod noise;
pub mod quantum;
pub mod rng;

pub use error::{Error, FieldError, Result};
