use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::state::StateVector;
use crate::error::{Error, Result};

/// Measurement budget: exact probabilities or a finite number of shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shots {
    #[default]
    Exact,
    Finite(u32),
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => serializer.serialize_str("EXACT"),
            Shots::Finite(m) => serializer.serialize_u32(*m),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u32),
            Word(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Count(m) => Ok(Shots::Finite(m)),
            Raw::Word(w) if w.eq_ignore_ascii_case("exact") => Ok(Shots::Exact),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a shot count or \"EXACT\", got {w:?}"
            ))),
        }
    }
}

/// Mean of `shots` ±1 outcomes of measuring `Z` on `qubit`.
pub fn shot_estimate<R: Rng + ?Sized>(
    state: &StateVector,
    qubit: usize,
    shots: u32,
    rng: &mut R,
) -> Result<f64> {
    state.check_qubit(qubit)?;
    if shots == 0 {
        return Err(Error::config("shot count must be at least 1"));
    }
    let mask = 1usize << qubit;
    let p_one: f64 = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| i & mask != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    let mut total = 0i64;
    for _ in 0..shots {
        total += if rng.random::<f64>() < p_one { -1 } else { 1 };
    }
    Ok(total as f64 / f64::from(shots))
}

/// Empirical distribution of `shots` samples from `probs`.
pub fn sample_distribution<R: Rng + ?Sized>(
    probs: &[f64],
    shots: u32,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::config("shot count must be at least 1"));
    }
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cumulative.push(acc);
    }
    let mut counts = vec![0u32; probs.len()];
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let idx = cumulative
            .partition_point(|&c| c <= u)
            .min(probs.len() - 1);
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| f64::from(c) / f64::from(shots))
        .collect())
}
