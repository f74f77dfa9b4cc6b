use crate::error::{Error, Result};

/// Dataset-size-weighted average `(1/D)·Σ |D_n|·ω_n`, `D = Σ |D_n|`.
///
/// Weights are formed as `|D_n| / D` before multiplying, so scaling every
/// shard size by the same factor leaves the result bit-identical and a
/// single client's parameters come back unchanged.
pub fn aggregate<P: AsRef<[f64]>>(client_params: &[P], shard_sizes: &[usize]) -> Result<Vec<f64>> {
    let first = client_params
        .first()
        .ok_or_else(|| Error::structural("no client parameters to aggregate"))?
        .as_ref();
    if client_params.len() != shard_sizes.len() {
        return Err(Error::structural(format!(
            "{} parameter vectors but {} shard sizes",
            client_params.len(),
            shard_sizes.len()
        )));
    }
    if shard_sizes.contains(&0) {
        return Err(Error::structural("shard sizes must be positive"));
    }
    let total = shard_sizes.iter().sum::<usize>() as f64;
    let mut out = vec![0.0; first.len()];
    for (params, &size) in client_params.iter().zip(shard_sizes) {
        let params = params.as_ref();
        if params.len() != out.len() {
            return Err(Error::structural(format!(
                "parameter length mismatch: {} vs {}",
                params.len(),
                out.len()
            )));
        }
        let weight = size as f64 / total;
        for (acc, p) in out.iter_mut().zip(params) {
            *acc += weight * p;
        }
    }
    Ok(out)
}
