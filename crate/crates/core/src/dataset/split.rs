use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::examples::OrderedHoldsExample;
use crate::error::{Error, Result};

/// Base ids held out for validation: `round(n * val_fraction)` of the
/// distinct bases, clamped so both sides keep at least one.
pub fn split_bases(base_ids: &BTreeSet<usize>, val_fraction: f64, seed: u64) -> Result<BTreeSet<usize>> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!("val_fraction {val_fraction} must lie in (0, 1)")));
    }
    let n = base_ids.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 base examples to split, found {n}")));
    }
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let mut ids: Vec<usize> = base_ids.iter().copied().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(ids.into_iter().take(n_val).collect())
}

/// Splits by base example, so permuted copies of one base never straddle
/// the two sides. Relative order within each side is preserved.
pub fn split_train_val(
    dataset: &[OrderedHoldsExample],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<OrderedHoldsExample>, Vec<OrderedHoldsExample>)> {
    let bases: BTreeSet<usize> = dataset.iter().map(|e| e.base_id).collect();
    let val_ids = split_bases(&bases, val_fraction, seed)?;
    let (val, train): (Vec<_>, Vec<_>) = dataset.iter().cloned().partition(|e| val_ids.contains(&e.base_id));
    Ok((train, val))
}
