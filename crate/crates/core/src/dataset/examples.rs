use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{is_permutation, HoldsSequence, Point};

/// Holds in presentation order plus the order in which they are used.
///
/// `order[k]` is the index into `original` of the `k`-th hold used, so the
/// sorted sequence is always a permutation of the original one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedHoldsExample {
    pub base_id: usize,
    pub original: Vec<Point>,
    pub order: Vec<usize>,
}

impl OrderedHoldsExample {
    pub fn new(base_id: usize, original: Vec<Point>, order: Vec<usize>) -> Result<Self> {
        if !is_permutation(&order, original.len()) {
            return Err(Error::invalid(format!("order {order:?} is not a permutation of 0..{}", original.len())));
        }
        Ok(Self { base_id, original, order })
    }

    pub fn from_holds(base_id: usize, hs: &HoldsSequence) -> Result<Self> {
        let order = hs.order.clone().ok_or_else(|| Error::invalid("holds sequence has no order"))?;
        Self::new(base_id, hs.holds.clone(), order)
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    pub fn sorted(&self) -> Vec<Point> {
        self.order.iter().map(|&i| self.original[i]).collect()
    }

    /// Re-presents the holds as `original'[k] = original[perm[k]]`, keeping
    /// the usage order of the underlying holds.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        Self {
            base_id: self.base_id,
            original: perm.iter().map(|&i| self.original[i]).collect(),
            order: self.order.iter().map(|&old| inverse[old]).collect(),
        }
    }
}

/// For every example, `n_perms` copies with independently shuffled
/// presentation order. Deterministic for a given seed.
pub fn permute_augment(examples: &[OrderedHoldsExample], n_perms: usize, seed: u64) -> Result<Vec<OrderedHoldsExample>> {
    if n_perms < 1 {
        return Err(Error::invalid("n_perms must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(examples.len() * n_perms);
    for ex in examples {
        for _ in 0..n_perms {
            let mut perm: Vec<usize> = (0..ex.len()).collect();
            perm.shuffle(&mut rng);
            out.push(ex.permuted(&perm));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base(id: usize, n: usize) -> OrderedHoldsExample {
        let original = (0..n).map(|i| Point::new(0.05 * i as f64, 0.9 - 0.04 * i as f64)).collect();
        let order = (0..n).rev().collect();
        OrderedHoldsExample::new(id, original, order).unwrap()
    }

    fn key(p: &Point) -> (u64, u64) {
        (p.x.to_bits(), p.y.to_bits())
    }

    #[test]
    fn twenty_by_fifty_is_thousand() {
        let bases: Vec<_> = (0..20).map(|i| base(i, 5 + i % 7)).collect();
        let aug = permute_augment(&bases, 50, 1).unwrap();
        assert_eq!(aug.len(), 1000);
    }

    #[test]
    fn single_perm_keeps_multisets() {
        let bases: Vec<_> = (0..3).map(|i| base(i, 6)).collect();
        let aug = permute_augment(&bases, 1, 9).unwrap();
        for (a, b) in aug.iter().zip(&bases) {
            let mut x: Vec<_> = a.original.iter().map(key).collect();
            let mut y: Vec<_> = b.original.iter().map(key).collect();
            x.sort_unstable();
            y.sort_unstable();
            assert_eq!(x, y);
            assert_eq!(a.sorted(), b.sorted());
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let bases = vec![base(0, 8)];
        assert_eq!(permute_augment(&bases, 4, 5).unwrap(), permute_augment(&bases, 4, 5).unwrap());
        assert!(permute_augment(&bases, 0, 5).is_err());
    }

    proptest! {
        #[test]
        fn augmentation_preserves_sorted_side(n in 1usize..18, perms in 1usize..6, seed in any::<u64>()) {
            let b = base(0, n);
            for ex in permute_augment(std::slice::from_ref(&b), perms, seed).unwrap() {
                prop_assert_eq!(ex.sorted(), b.sorted());
                prop_assert!(is_permutation(&ex.order, n));
            }
        }
    }
}
