//! Sequence models: the holds-to-moves translator ([`seq2seq`]), the
//! autoregressive hold-order transformer ([`art`]) and its single-pass
//! variant ([`simple`]).

pub mod art;
pub mod metrics;
pub mod seq2seq;
pub mod simple;
pub mod train;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dataset::{OrderedHoldsExample, TokenizedPair};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, ParamStore, Params, Tensor};

pub use art::{ArtConfig, ArtModel, GenerateOptions, SlotInit};
pub use metrics::{perplexity_from_nll, perplexity_from_probs, token_accuracy, Accuracy, EpochMetrics};
pub use seq2seq::{Seq2SeqConfig, Seq2SeqModel};
pub use simple::{SimpleConfig, SimpleModel};
pub use train::{evaluate, train_order_model, EvalReport, TrainConfig, TrainOutcome};

/// A hold-ordering model trained on [`TokenizedPair`]s.
pub trait OrderModel: Sized + Sync {
    const NAME: &'static str;
    type Config: Serialize + DeserializeOwned + Clone;

    fn from_config(cfg: Self::Config) -> Result<Self>;
    fn config(&self) -> &Self::Config;
    fn init_params(&self, seed: u64) -> ParamStore;
    fn pad_id(&self) -> usize;
    /// Formats and pads one example for this model.
    fn prepare(&self, ex: &OrderedHoldsExample) -> Result<TokenizedPair>;
    fn logits(&self, p: &Params, pair: &TokenizedPair) -> Result<Tensor>;
    /// Mean cross-entropy of the pair; accumulates gradients when asked.
    fn loss(&self, p: &Params, grads: Option<&mut Params>, pair: &TokenizedPair, ignore_id: Option<usize>) -> Result<f64>;

    fn prepare_all(&self, examples: &[OrderedHoldsExample]) -> Result<Vec<TokenizedPair>> {
        examples.iter().map(|e| self.prepare(e)).collect()
    }

    fn checkpoint(&self, store: &ParamStore, train: Option<&TrainConfig>) -> Result<Checkpoint> {
        let train = train.map(serde_json::to_value).transpose()?;
        Ok(Checkpoint::from_store(Self::NAME, serde_json::to_value(self.config())?, train, store))
    }

    fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, ParamStore)> {
        if ck.model != Self::NAME {
            return Err(Error::invalid(format!("checkpoint holds a `{}` model, expected `{}`", ck.model, Self::NAME)));
        }
        let cfg: Self::Config = serde_json::from_value(ck.config.clone())?;
        let model = Self::from_config(cfg)?;
        let store = ck.to_store()?;
        let expected = model.init_params(0);
        for (name, t) in expected.values.iter() {
            match store.values.get(name) {
                Some(s) if s.shape() == t.shape() => {}
                _ => return Err(Error::invalid(format!("checkpoint is missing parameter `{name}` or has the wrong shape"))),
            }
        }
        Ok((model, store))
    }
}
