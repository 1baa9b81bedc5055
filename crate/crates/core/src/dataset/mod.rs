//! Training data for the sequence models.

pub mod examples;
pub mod quantize;
pub mod split;
pub mod tokens;
pub mod vocab;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sequence::{HoldsSequence, MoveSequence};

pub use examples::{permute_augment, OrderedHoldsExample};
pub use quantize::{coordinate_word, quantize_coordinate};
pub use split::{split_bases, split_train_val};
pub use tokens::{
    decode_sorted, format_autoregressive_pair, format_simple_pair, pad_to_length, pad_with, PadStrategy,
    TokenizedPair, DEFAULT_MAX_HOLDS, PAD_COORD,
};
pub use vocab::{build_seq2seq_vocabs, Vocab, EOS, SOS, UNK};

/// Describes a generated ordering dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub bases: Vec<HoldsSequence>,
    pub seed: u64,
    pub n_perms: usize,
    pub max_len: usize,
    pub pad_id: usize,
    pub val_fraction: f64,
    #[serde(default)]
    pub pad_strategy: PadStrategy,
    /// Move sequences the bases were taken from, index-aligned with
    /// `bases`. Needed by the seq2seq model only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<MoveSequence>,
}

impl DatasetManifest {
    pub fn new(bases: Vec<HoldsSequence>, seed: u64, n_perms: usize) -> Self {
        Self {
            bases,
            seed,
            n_perms,
            max_len: DEFAULT_MAX_HOLDS,
            pad_id: DEFAULT_MAX_HOLDS,
            val_fraction: 0.2,
            pad_strategy: PadStrategy::Imaginary,
            sequences: Vec::new(),
        }
    }

    /// Bases with their usage order taken from move sequences.
    pub fn from_sequences(sequences: Vec<MoveSequence>, seed: u64, n_perms: usize) -> Self {
        let bases = sequences.iter().map(MoveSequence::to_holds_sequence).collect();
        Self { sequences, ..Self::new(bases, seed, n_perms) }
    }

    /// Move sequences split on the same base ids as [`Self::build`].
    pub fn split_sequences(&self) -> Result<(Vec<MoveSequence>, Vec<MoveSequence>)> {
        if self.sequences.len() != self.bases.len() {
            return Err(crate::Error::invalid("manifest carries no move sequences aligned with its bases"));
        }
        let ids = (0..self.sequences.len()).collect();
        let val_ids = split_bases(&ids, self.val_fraction, self.seed)?;
        let (val, train): (Vec<_>, Vec<_>) =
            self.sequences.iter().enumerate().partition(|(i, _)| val_ids.contains(i));
        Ok((train.into_iter().map(|(_, s)| s.clone()).collect(), val.into_iter().map(|(_, s)| s.clone()).collect()))
    }

    pub fn base_examples(&self) -> Result<Vec<OrderedHoldsExample>> {
        self.bases.iter().enumerate().map(|(i, hs)| OrderedHoldsExample::from_holds(i, hs)).collect()
    }

    /// Grouped split of the bases, then augmentation of each side with
    /// independent seeds.
    pub fn build(&self) -> Result<(Vec<OrderedHoldsExample>, Vec<OrderedHoldsExample>)> {
        let (train, val) = split_train_val(&self.base_examples()?, self.val_fraction, self.seed)?;
        Ok((
            permute_augment(&train, self.n_perms, self.seed.wrapping_add(1))?,
            permute_augment(&val, self.n_perms, self.seed.wrapping_add(2))?,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
