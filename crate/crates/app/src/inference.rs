//! Checkpoint loading and inference shared by the CLI and the service.

use std::path::Path;

use anyhow::{bail, Context, Result};
use betaflow::dataset::vocab::holds_sentence;
use betaflow::models::{ArtModel, GenerateOptions, OrderModel, Seq2SeqModel, SimpleModel};
use betaflow::nn::{Checkpoint, ParamStore};
use betaflow::{HoldsSequence, Point};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Art,
    Simple,
    Seq2seq,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Art => ArtModel::NAME,
            ModelKind::Simple => SimpleModel::NAME,
            ModelKind::Seq2seq => betaflow::models::seq2seq::MODEL_NAME,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [ModelKind::Art, ModelKind::Simple, ModelKind::Seq2seq].into_iter().find(|k| k.name() == name)
    }
}

pub enum LoadedModel {
    Art(ArtModel, ParamStore),
    Simple(SimpleModel, ParamStore),
    Seq2seq(Seq2SeqModel, ParamStore),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderPrediction {
    pub model: String,
    pub order: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_vs_provided: Option<f64>,
}

impl LoadedModel {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(match ModelKind::from_name(&ck.model) {
            Some(ModelKind::Art) => {
                let (m, s) = ArtModel::from_checkpoint(ck)?;
                LoadedModel::Art(m, s)
            }
            Some(ModelKind::Simple) => {
                let (m, s) = SimpleModel::from_checkpoint(ck)?;
                LoadedModel::Simple(m, s)
            }
            Some(ModelKind::Seq2seq) => {
                let (m, s) = Seq2SeqModel::from_checkpoint(ck)?;
                LoadedModel::Seq2seq(m, s)
            }
            None => bail!("unknown model `{}` in checkpoint", ck.model),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        Self::from_checkpoint(&ck).with_context(|| format!("checkpoint {}", path.display()))
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            LoadedModel::Art(..) => ModelKind::Art,
            LoadedModel::Simple(..) => ModelKind::Simple,
            LoadedModel::Seq2seq(..) => ModelKind::Seq2seq,
        }
    }

    pub fn num_parameters(&self) -> usize {
        match self {
            LoadedModel::Art(_, s) | LoadedModel::Simple(_, s) | LoadedModel::Seq2seq(_, s) => s.num_scalars(),
        }
    }

    pub fn config_json(&self) -> serde_json::Value {
        match self {
            LoadedModel::Art(m, _) => serde_json::to_value(m.config()),
            LoadedModel::Simple(m, _) => serde_json::to_value(m.config()),
            LoadedModel::Seq2seq(m, _) => {
                let c = m.config();
                Ok(serde_json::json!({
                    "hidden": c.hidden,
                    "embed": c.embed,
                    "decimals": c.decimals,
                    "input_vocab": c.input_vocab.len(),
                    "output_vocab": c.output_vocab.len(),
                }))
            }
        }
        .expect("model configs serialize")
    }

    /// Predicted id per usage slot, with the share of slots matching
    /// `holds.order` when it is given.
    pub fn predict_order(&self, holds: &HoldsSequence, exclude_used: bool) -> Result<OrderPrediction> {
        let order = match self {
            LoadedModel::Art(m, s) => {
                m.generate(&s.values, &holds.holds, GenerateOptions { exclude_used, ..GenerateOptions::default() })?
            }
            LoadedModel::Simple(m, s) => m.predict(&s.values, &holds.holds)?,
            LoadedModel::Seq2seq(..) => bail!("the seq2seq model translates sentences; it does not predict hold orders"),
        };
        let accuracy_vs_provided = match &holds.order {
            Some(given) if given.len() == order.len() => {
                Some(order.iter().zip(given).filter(|(a, b)| a == b).count() as f64 / order.len() as f64)
            }
            Some(given) => bail!("order: expected {} ids, got {}", holds.len(), given.len()),
            None => None,
        };
        Ok(OrderPrediction { model: self.kind().name().to_string(), order, accuracy_vs_provided })
    }

    pub fn translate(&self, words: &[String]) -> Result<Vec<String>> {
        match self {
            LoadedModel::Seq2seq(m, s) => Ok(m.translate(&s.values, words)?),
            _ => bail!("model `{}` does not translate sentences", self.kind().name()),
        }
    }

    pub fn translate_holds(&self, holds: &[Point]) -> Result<Vec<String>> {
        match self {
            LoadedModel::Seq2seq(m, _) => self.translate(&holds_sentence(holds, m.config().decimals)?),
            _ => bail!("model `{}` does not translate sentences", self.kind().name()),
        }
    }
}
