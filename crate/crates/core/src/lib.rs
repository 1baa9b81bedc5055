//! Climbing move-sequence toolkit.
//!
//! * [`landmarks`] / [`motion`] / [`dbscan`]: pose-landmark streams to static
//!   extremity points, holds and ordered move sequences.
//! * [`skeleton`]: move sequences back to full-body landmark animations.
//! * [`nn`]: a small dense numerical core with hand-written backward passes.
//! * [`dataset`]: vocabularies, permutation augmentation and token formatting.
//! * [`models`]: the seq2seq translator and the two hold-ordering transformers.
//! * [`synthetic`]: deterministic fixture generators (climber streams and
//!   Moonboard problems).

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod dbscan;
pub mod error;
pub mod landmarks;
pub mod models;
pub mod motion;
pub mod nn;
pub mod sequence;
pub mod skeleton;
pub mod synthetic;

pub use error::{Error, Result};
pub use sequence::{HoldsSequence, Limb, Move, MoveSequence, Point};
