//! Dense double-precision numerical core: tensors, layer kernels with
//! hand-written backward passes, cross-entropy, Adam, sinusoidal embeddings
//! and a finite-difference gradient checker.

pub mod attention;
pub mod gradcheck;
pub mod gru;
pub mod layers;
pub mod loss;
pub mod modules;
pub mod params;
pub mod posemb;
mod tensor;

pub use attention::{scaled_dot_attention, scaled_dot_attention_backward, Mask};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use loss::{argmax, log_softmax, softmax_cross_entropy};
pub use params::{AdamConfig, Checkpoint, ParamStore, Params};
pub use posemb::{coordinate_embedding, sinusoidal_embedding};
pub use tensor::Tensor;
