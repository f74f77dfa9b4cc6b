//! Measurement-level noise: depolarizing mix toward uniform, then
//! independent per-qubit readout bit flips.

use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub depolarizing_p: f64,
    pub readout_flip_p: f64,
}

impl NoiseSpec {
    pub fn violations(&self) -> Vec<FieldError> {
        [
            ("noise.depolarizing_p", self.depolarizing_p),
            ("noise.readout_flip_p", self.readout_flip_p),
        ]
        .into_iter()
        .filter(|(_, p)| !(0.0..=1.0).contains(p))
        .map(|(field, _)| FieldError::new(field, "must lie in [0, 1]"))
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Validation(errs))
        }
    }

    pub fn is_active(&self) -> bool {
        self.enabled && (self.depolarizing_p > 0.0 || self.readout_flip_p > 0.0)
    }
}

/// Applies the noise channel to an outcome distribution over `2^Q` states.
/// Returns the input unchanged when noise is disabled.
pub fn apply_noise(probs: &[f64], spec: &NoiseSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut out = probs.to_vec();
    if !spec.enabled {
        return Ok(out);
    }
    let dim = out.len();
    if !dim.is_power_of_two() {
        return Err(crate::Error::structural(format!(
            "outcome distribution length {dim} is not a power of two"
        )));
    }
    let p = spec.depolarizing_p;
    if p > 0.0 {
        let floor = p / dim as f64;
        out.iter_mut().for_each(|x| *x = (1.0 - p) * *x + floor);
    }
    let f = spec.readout_flip_p;
    if f > 0.0 {
        for q in 0..dim.trailing_zeros() {
            let mask = 1usize << q;
            for i in 0..dim {
                if i & mask == 0 {
                    let (a, b) = (out[i], out[i | mask]);
                    out[i] = (1.0 - f) * a + f * b;
                    out[i | mask] = f * a + (1.0 - f) * b;
                }
            }
        }
    }
    Ok(out)
}
