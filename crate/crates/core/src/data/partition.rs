//! Client partitioning: IID near-equal splits and label-skew shard dealing.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};

pub const MAX_CLIENTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PartitionMode {
    #[default]
    #[serde(rename = "IID")]
    Iid,
    #[serde(rename = "NONIID_LABEL_SKEW")]
    NonIidLabelSkew,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionPlan {
    pub mode: PartitionMode,
    pub num_clients: usize,
    pub shards_per_client: usize,
    pub seed: u64,
}

/// Splits `dataset` into `num_clients` disjoint, exhaustive, non-empty index
/// sets.
///
/// IID shuffles and cuts contiguous blocks whose sizes differ by at most one.
/// Label skew sorts by label, cuts `N·s` contiguous shards and deals `s`
/// shards to each client through a seeded permutation.
pub fn partition(dataset: &Dataset, plan: &PartitionPlan) -> Result<Vec<Vec<usize>>> {
    let n = dataset.len();
    let clients = plan.num_clients;
    if clients == 0 || clients > MAX_CLIENTS {
        return Err(Error::config(format!(
            "num_clients must be in 1..={MAX_CLIENTS}, got {clients}"
        )));
    }
    if clients > n {
        return Err(Error::config(format!(
            "num_clients {clients} exceeds the {n} available training samples"
        )));
    }
    let mut rng = rng_from(plan.seed, &[stream::PARTITION]);
    match plan.mode {
        PartitionMode::Iid => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            Ok(even_chunks(&order, clients))
        }
        PartitionMode::NonIidLabelSkew => {
            let per = plan.shards_per_client;
            let total = clients * per;
            if per == 0 || total > n {
                return Err(Error::config(format!(
                    "{clients} clients × {per} shards per client needs 1..={n} shards"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| dataset.samples[i].label);
            let shards = even_chunks(&order, total);
            let mut deal: Vec<usize> = (0..total).collect();
            deal.shuffle(&mut rng);
            Ok(deal
                .chunks(per)
                .map(|ids| ids.iter().flat_map(|&s| shards[s].iter().copied()).collect())
                .collect())
        }
    }
}

/// Contiguous chunks with sizes differing by at most one.
fn even_chunks(items: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}
