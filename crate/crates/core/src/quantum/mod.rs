//! Exact state-vector simulation.
//!
//! Basis index bit `q` holds the value of qubit `q`, so qubit 0 is the least
//! significant bit. Ket labels in tests list qubit 0 first: `|10⟩` has qubit 0
//! set and is amplitude index 1.

mod gate;
mod measure;
mod state;

pub use gate::{GateKind, GateOp};
pub use measure::{sample_distribution, shot_estimate, Shots};
pub use state::{amplitude_encode, zero_state, StateVector, MAX_QUBITS};
pub(crate) use state::check_qubits;

pub use num_complex::Complex64;
