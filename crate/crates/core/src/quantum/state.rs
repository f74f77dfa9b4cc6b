use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported register. 2^14 amplitudes keep gradient evaluation
/// interactive on a laptop.
pub const MAX_QUBITS: usize = 14;

pub(crate) fn check_qubits(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(Error::config(format!(
            "num_qubits must be in 1..={MAX_QUBITS}, got {num_qubits}"
        )));
    }
    Ok(())
}

/// Pure state of `num_qubits` qubits as `2^num_qubits` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// Wraps raw amplitudes. The caller is responsible for normalization;
    /// the length must be a power of two within the qubit cap.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(Error::structural(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_qubits(num_qubits)?;
        Ok(Self {
            amplitudes,
            num_qubits,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Measurement distribution over the computational basis.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨ψ|Z_q|ψ⟩`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & mask == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum())
    }

    pub(crate) fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::structural(format!(
                "qubit index {qubit} out of range for {} qubits",
                self.num_qubits
            )));
        }
        Ok(())
    }
}

/// `|0⟩^⊗Q`.
pub fn zero_state(num_qubits: usize) -> Result<StateVector> {
    check_qubits(num_qubits)?;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
    amplitudes[0] = Complex64::new(1.0, 0.0);
    Ok(StateVector {
        amplitudes,
        num_qubits,
    })
}

/// Amplitude-encodes `features` into `num_qubits` qubits.
///
/// Short inputs are zero-padded to `2^num_qubits` before normalization. An
/// all-zero input has no direction and encodes to `|0…0⟩` with a warning.
pub fn amplitude_encode(features: &[f64], num_qubits: usize) -> Result<StateVector> {
    check_qubits(num_qubits)?;
    let dim = 1usize << num_qubits;
    if features.len() > dim {
        let required_qubits = features.len().next_power_of_two().trailing_zeros() as usize;
        return Err(Error::Dimension {
            len: features.len(),
            num_qubits,
            required_qubits,
        });
    }
    let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        log::warn!("feature vector has zero or non-finite norm; encoding as |0>");
        return zero_state(num_qubits);
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
    for (amp, &x) in amplitudes.iter_mut().zip(features) {
        *amp = Complex64::new(x / norm, 0.0);
    }
    Ok(StateVector {
        amplitudes,
        num_qubits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real_parts(s: &StateVector) -> Vec<f64> {
        s.amplitudes().iter().map(|a| a.re).collect()
    }

    #[test]
    fn zero_state_basis() {
        assert_eq!(real_parts(&zero_state(1).unwrap()), vec![1.0, 0.0]);
        assert_eq!(real_parts(&zero_state(2).unwrap()), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(zero_state(0), Err(Error::Config(_))));
        let err = zero_state(MAX_QUBITS + 1).unwrap_err().to_string();
        assert!(err.contains("14"), "{err}");
    }

    #[test]
    fn encode_examples() {
        assert_eq!(
            real_parts(&amplitude_encode(&[1.0, 0.0, 0.0, 0.0], 2).unwrap()),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        let s = real_parts(&amplitude_encode(&[3.0, 4.0], 1).unwrap());
        assert!((s[0] - 0.6).abs() < 1e-15 && (s[1] - 0.8).abs() < 1e-15);

        let s = real_parts(&amplitude_encode(&[1.0, 1.0, 1.0], 2).unwrap());
        let r = 1.0 / 3f64.sqrt();
        for (got, want) in s.iter().zip([r, r, r, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }

        assert_eq!(
            real_parts(&amplitude_encode(&[0.0, 0.0], 1).unwrap()),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn encode_too_long_reports_required_qubits() {
        match amplitude_encode(&[1.0; 5], 2) {
            Err(Error::Dimension {
                required_qubits, ..
            }) => assert_eq!(required_qubits, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn probabilities_ignore_phase() {
        let h = 1.0 / 2f64.sqrt();
        let s = StateVector::from_amplitudes(vec![Complex64::new(h, 0.0), Complex64::new(-h, 0.0)])
            .unwrap();
        let p = s.probabilities();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);

        let bell = StateVector::from_amplitudes(vec![
            Complex64::new(h, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(h, 0.0),
        ])
        .unwrap();
        let p = bell.probabilities();
        for (got, want) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn expectation_of_basis_states() {
        let zero = zero_state(1).unwrap();
        assert_eq!(zero.expectation_z(0).unwrap(), 1.0);
        let one = amplitude_encode(&[0.0, 1.0], 1).unwrap();
        assert_eq!(one.expectation_z(0).unwrap(), -1.0);
        assert!(one.expectation_z(1).is_err());
    }
}
