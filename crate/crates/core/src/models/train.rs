use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TokenizedPair;
use crate::error::{Error, Result};
use crate::models::metrics::{pad_fraction, token_accuracy, write_metrics_csv, EpochMetrics};
use crate::models::OrderModel;
use crate::nn::{argmax, AdamConfig, Checkpoint, ParamStore, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Validation runs every `eval_interval` epochs and after the last one.
    pub eval_interval: usize,
    pub seed: u64,
    /// Leave pad targets out of the loss.
    #[serde(default)]
    pub ignore_pad: bool,
    /// Probability of feeding gold tokens to the seq2seq decoder.
    #[serde(default = "default_teacher_forcing")]
    pub teacher_forcing: f64,
    /// Where `best.json`, `latest.json` and `metrics.csv` go. Not part of
    /// the recipe stored in checkpoints.
    #[serde(skip)]
    pub checkpoint_dir: Option<PathBuf>,
}

fn default_teacher_forcing() -> f64 {
    0.5
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 1e-3,
            batch_size: 16,
            eval_interval: 1,
            seed: 0,
            ignore_pad: false,
            teacher_forcing: default_teacher_forcing(),
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.eval_interval == 0 {
            return Err(Error::invalid("epochs, batch_size and eval_interval must be >= 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.teacher_forcing) {
            return Err(Error::invalid("teacher_forcing must lie in [0, 1]"));
        }
        Ok(())
    }

    pub(crate) fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }

    pub(crate) fn is_eval_epoch(&self, epoch: usize) -> bool {
        epoch.is_multiple_of(self.eval_interval) || epoch == self.epochs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean per-token loss.
    pub loss: f64,
    pub ppl: f64,
    /// Token accuracy over all positions, pads included.
    pub accuracy: f64,
    /// Token accuracy over positions whose target is not the pad.
    pub accuracy_non_pad: Option<f64>,
    /// Share of predicted tokens that are the pad id.
    pub pad_fraction: f64,
}

/// Teacher-forced argmax at every position.
pub fn predict_tokens<M: OrderModel>(model: &M, p: &Params, pair: &TokenizedPair) -> Result<Vec<usize>> {
    let logits = model.logits(p, pair)?;
    Ok((0..logits.rows()).map(|i| argmax(logits.row(i))).collect())
}

pub fn evaluate<M: OrderModel>(model: &M, p: &Params, pairs: &[TokenizedPair], ignore_pad: bool) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    let pad = model.pad_id();
    let ignore = ignore_pad.then_some(pad);
    let per: Vec<(f64, usize, Vec<usize>)> = pairs
        .par_iter()
        .map(|pair| {
            let loss = model.loss(p, None, pair, ignore)?;
            let counted = pair.output_tokens.iter().filter(|&&t| Some(t) != ignore).count();
            Ok((loss * counted as f64, counted, predict_tokens(model, p, pair)?))
        })
        .collect::<Result<_>>()?;
    let (mut nll, mut tokens) = (0.0, 0);
    let (mut preds, mut targets) = (Vec::new(), Vec::new());
    for ((l, c, pr), pair) in per.into_iter().zip(pairs) {
        nll += l;
        tokens += c;
        preds.extend(pr);
        targets.extend_from_slice(&pair.output_tokens);
    }
    let loss = nll / tokens as f64;
    let acc = token_accuracy(&preds, &targets, pad)?;
    Ok(EvalReport {
        loss,
        ppl: loss.exp(),
        accuracy: acc.all,
        accuracy_non_pad: acc.non_pad,
        pad_fraction: pad_fraction(&preds, pad),
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochMetrics>,
    /// Epoch and selection loss of the best checkpoint (validation loss, or
    /// training loss without a validation set).
    pub best_epoch: usize,
    pub best_loss: f64,
    pub best: ParamStore,
    pub latest: ParamStore,
}

/// Sum of per-example gradients in a fixed order, plus the summed loss.
pub(crate) fn batch_gradients<F>(template: &Params, n: usize, f: F) -> Result<(f64, Params)>
where
    F: Fn(usize, &mut Params) -> Result<f64> + Sync,
{
    let parts: Vec<(f64, Params)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = template.zeros_like();
            let loss = f(i, &mut g)?;
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;
    let mut total = template.zeros_like();
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        total.add_all(&g)?;
    }
    Ok((loss, total))
}

pub(crate) fn save_checkpoint(dir: &Path, file: &str, ck: &Checkpoint) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    ck.save(&dir.join(file))
}

/// Adam over shuffled mini-batches with mean-reduced gradients. Keeps the
/// parameters with the lowest validation loss next to the latest ones and,
/// when a checkpoint directory is set, writes `best.json`, `latest.json`
/// and `metrics.csv` there.
pub fn train_order_model<M: OrderModel>(
    model: &M,
    store: &mut ParamStore,
    train: &[TokenizedPair],
    val: &[TokenizedPair],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let ignore = cfg.ignore_pad.then_some(model.pad_id());
    let adam = cfg.adam();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ParamStore)> = None;
    let model_config = serde_json::to_value(model.config())?;
    let train_config = serde_json::to_value(cfg)?;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_gradients(&store.values, batch.len(), |i, g| {
                model.loss(&store.values, Some(g), &train[batch[i]], ignore)
            })?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss diverged at epoch {epoch}")));
            }
            epoch_loss += loss;
            store.grads = grads;
            store.scale_grads(1.0 / batch.len() as f64);
            store.adam_step(&adam);
        }
        let train_loss = epoch_loss / train.len() as f64;
        let mut row = EpochMetrics { epoch, train_loss, val_loss: None, val_ppl: None, val_acc: None };
        if cfg.is_eval_epoch(epoch) {
            let selection = if val.is_empty() {
                train_loss
            } else {
                let r = evaluate(model, &store.values, val, cfg.ignore_pad)?;
                row.val_loss = Some(r.loss);
                row.val_ppl = Some(r.ppl);
                row.val_acc = Some(r.accuracy);
                r.loss
            };
            if !selection.is_finite() {
                return Err(Error::NonFinite(format!("validation loss diverged at epoch {epoch}")));
            }
            if best.as_ref().is_none_or(|b| selection < b.1) {
                best = Some((epoch, selection, store.clone()));
                if let Some(dir) = &cfg.checkpoint_dir {
                    let ck = Checkpoint::from_store(M::NAME, model_config.clone(), Some(train_config.clone()), store);
                    save_checkpoint(dir, "best.json", &ck)?;
                }
            }
        }
        history.push(row);
    }

    if let Some(dir) = &cfg.checkpoint_dir {
        let ck = Checkpoint::from_store(M::NAME, model_config, Some(train_config), store);
        save_checkpoint(dir, "latest.json", &ck)?;
        let f = std::fs::File::create(dir.join("metrics.csv"))?;
        write_metrics_csv(&history, f)?;
    }
    let (best_epoch, best_loss, best_store) = best.expect("at least one evaluation epoch");
    Ok(TrainOutcome { history, best_epoch, best_loss, best: best_store, latest: store.clone() })
}
