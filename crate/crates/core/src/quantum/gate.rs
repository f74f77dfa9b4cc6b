use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::StateVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cnot,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        !matches!(self, GateKind::Cnot)
    }
}

/// One gate of a circuit. Rotations read their angle from `angle_slot` of
/// the parameter vector; CNOT has a control and no angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle_slot: Option<usize>,
}

impl GateOp {
    pub fn rotation(kind: GateKind, target: usize, slot: usize) -> Self {
        debug_assert!(kind.is_rotation());
        Self {
            kind,
            target,
            control: None,
            angle_slot: Some(slot),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            target,
            control: Some(control),
            angle_slot: None,
        }
    }

    /// Checks the structural invariants against a register size.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let in_range = |q: usize, what: &str| {
            if q >= num_qubits {
                Err(Error::structural(format!(
                    "{what} qubit {q} out of range for {num_qubits} qubits"
                )))
            } else {
                Ok(())
            }
        };
        in_range(self.target, "target")?;
        match (self.kind, self.control, self.angle_slot) {
            (GateKind::Cnot, Some(c), None) => {
                in_range(c, "control")?;
                if c == self.target {
                    return Err(Error::structural("CNOT control equals target"));
                }
                Ok(())
            }
            (GateKind::Cnot, _, _) => Err(Error::structural(
                "CNOT needs a control and takes no angle slot",
            )),
            (_, None, Some(_)) => Ok(()),
            (kind, _, _) => Err(Error::structural(format!(
                "{kind:?} needs an angle slot and takes no control"
            ))),
        }
    }
}

impl StateVector {
    /// Applies `gate` in place. Rotations require `angle`; CNOT rejects one.
    pub fn apply(&mut self, gate: &GateOp, angle: Option<f64>) -> Result<()> {
        gate.validate(self.num_qubits())?;
        match (gate.kind.is_rotation(), angle) {
            (true, Some(theta)) => {
                self.rotate(gate.kind, gate.target, theta);
                Ok(())
            }
            (true, None) => Err(Error::structural(format!(
                "{:?} applied without an angle",
                gate.kind
            ))),
            (false, Some(_)) => Err(Error::structural("angle supplied to CNOT")),
            (false, None) => {
                self.cnot(gate.control.unwrap_or_default(), gate.target);
                Ok(())
            }
        }
    }

    /// Consuming variant of [`StateVector::apply`].
    pub fn applied(mut self, gate: &GateOp, angle: Option<f64>) -> Result<Self> {
        self.apply(gate, angle)?;
        Ok(self)
    }

    /// Rotation about one axis on `target`, no bounds checks.
    pub(crate) fn rotate(&mut self, kind: GateKind, target: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        match kind {
            GateKind::Rx => {
                let mis = Complex64::new(0.0, -s);
                self.pair_update(target, |a0, a1| (a0 * c + a1 * mis, a0 * mis + a1 * c));
            }
            GateKind::Ry => {
                self.pair_update(target, |a0, a1| (a0 * c - a1 * s, a0 * s + a1 * c));
            }
            GateKind::Rz => {
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                self.pair_update(target, |a0, a1| (a0 * lo, a1 * hi));
            }
            GateKind::Cnot => unreachable!("CNOT is not a rotation"),
        }
    }

    pub(crate) fn cnot(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        let amps = self.amplitudes_mut();
        for i in 0..amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                amps.swap(i, i | tmask);
            }
        }
    }

    /// Visits every amplitude pair differing only in bit `target`.
    fn pair_update<F>(&mut self, target: usize, f: F)
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64),
    {
        let stride = 1usize << target;
        let amps = self.amplitudes_mut();
        for block in amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (n0, n1) = f(*a0, *a1);
                *a0 = n0;
                *a1 = n1;
            }
        }
    }
}
