//! Single-pass hold-order transformer: a linear projection of the padded
//! coordinates, unmasked encoder blocks and a linear head over the token
//! ids. There is no positional information, so the model is equivariant to
//! permutations of its input positions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{format_simple_pair, pad_with, OrderedHoldsExample, PadStrategy, TokenizedPair};
use crate::error::{Error, Result};
use crate::models::OrderModel;
use crate::nn::modules::{Linear, TransformerBlock, TransformerBlockCache};
use crate::nn::{argmax, softmax_cross_entropy, Mask, ParamStore, Params, Tensor};
use crate::sequence::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleConfig {
    pub max_holds: usize,
    pub dim: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn_hidden: usize,
    #[serde(default)]
    pub layer_norm: bool,
    #[serde(default)]
    pub pad_strategy: PadStrategy,
}

impl Default for SimpleConfig {
    fn default() -> Self {
        Self {
            max_holds: 17,
            dim: 128,
            heads: 4,
            blocks: 1,
            ffn_hidden: 256,
            layer_norm: false,
            pad_strategy: PadStrategy::Imaginary,
        }
    }
}

impl SimpleConfig {
    pub fn pad_id(&self) -> usize {
        self.max_holds
    }

    pub fn vocab(&self) -> usize {
        self.max_holds + 1
    }
}

#[derive(Debug, Clone)]
pub struct SimpleModel {
    cfg: SimpleConfig,
    input: Linear,
    blocks: Vec<TransformerBlock>,
    head: Linear,
}

struct ForwardCache {
    x: Tensor,
    blocks: Vec<TransformerBlockCache>,
    hidden: Tensor,
}

impl SimpleModel {
    pub fn new(cfg: SimpleConfig) -> Result<Self> {
        if cfg.max_holds < 1 || cfg.dim == 0 || cfg.blocks == 0 || cfg.ffn_hidden == 0 {
            return Err(Error::invalid("simple config needs positive max_holds, dim, blocks and ffn_hidden"));
        }
        if cfg.heads == 0 || !cfg.dim.is_multiple_of(cfg.heads) {
            return Err(Error::invalid(format!("dim {} is not divisible by {} heads", cfg.dim, cfg.heads)));
        }
        Ok(Self {
            input: Linear::new("input"),
            blocks: (0..cfg.blocks).map(|i| TransformerBlock::new(&format!("block{i}"), cfg.heads, cfg.layer_norm)).collect(),
            head: Linear::new("head"),
            cfg,
        })
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        self.input.init(&mut store, 2, self.cfg.dim, &mut rng);
        for b in &self.blocks {
            b.init(&mut store, self.cfg.dim, self.cfg.ffn_hidden, &mut rng);
        }
        self.head.init(&mut store, self.cfg.dim, self.cfg.vocab(), &mut rng);
        store
    }

    fn forward_cached(&self, p: &Params, coords: &[Point]) -> Result<(Tensor, ForwardCache)> {
        if coords.len() != self.cfg.max_holds {
            return Err(Error::invalid(format!("expected {} coordinates, got {}", self.cfg.max_holds, coords.len())));
        }
        let x = Tensor::from_rows(&coords.iter().map(|c| vec![c.x, c.y]).collect::<Vec<_>>())?;
        let mut h = self.input.forward(p, &x)?;
        let mask = Mask::full(coords.len(), coords.len());
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(p, &h, &mask)?;
            caches.push(c);
            h = y;
        }
        let logits = self.head.forward(p, &h)?;
        Ok((logits, ForwardCache { x, blocks: caches, hidden: h }))
    }

    /// Logits `[max_holds, max_holds + 1]` for a padded coordinate list.
    pub fn forward(&self, p: &Params, coords: &[Point]) -> Result<Tensor> {
        Ok(self.forward_cached(p, coords)?.0)
    }

    fn backward(&self, p: &Params, g: &mut Params, cache: &ForwardCache, dlogits: &Tensor) -> Result<()> {
        let mut dh = self.head.backward(p, g, &cache.hidden, dlogits)?;
        for (b, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            dh = b.backward(p, g, c, &dh)?;
        }
        self.input.backward(p, g, &cache.x, &dh)?;
        Ok(())
    }

    /// Predicted id per position for an unpadded hold list.
    pub fn predict(&self, p: &Params, holds: &[Point]) -> Result<Vec<usize>> {
        if holds.is_empty() || holds.len() > self.cfg.max_holds {
            return Err(Error::invalid(format!("expected 1..={} holds, got {}", self.cfg.max_holds, holds.len())));
        }
        let ex = OrderedHoldsExample::new(0, holds.to_vec(), (0..holds.len()).collect())?;
        let pair = self.prepare(&ex)?;
        let logits = self.forward(p, &pair.input_coords)?;
        Ok((0..holds.len()).map(|i| argmax(logits.row(i))).collect())
    }
}

impl OrderModel for SimpleModel {
    const NAME: &'static str = "simple";
    type Config = SimpleConfig;

    fn from_config(cfg: SimpleConfig) -> Result<Self> {
        SimpleModel::new(cfg)
    }

    fn config(&self) -> &SimpleConfig {
        &self.cfg
    }

    fn init_params(&self, seed: u64) -> ParamStore {
        SimpleModel::init_params(self, seed)
    }

    fn pad_id(&self) -> usize {
        self.cfg.pad_id()
    }

    fn prepare(&self, ex: &OrderedHoldsExample) -> Result<TokenizedPair> {
        let pair = format_simple_pair(ex, self.cfg.pad_id())?;
        pad_with(&pair, self.cfg.max_holds, self.cfg.pad_id(), self.cfg.pad_strategy)
    }

    fn logits(&self, p: &Params, pair: &TokenizedPair) -> Result<Tensor> {
        self.forward(p, &pair.input_coords)
    }

    fn loss(&self, p: &Params, grads: Option<&mut Params>, pair: &TokenizedPair, ignore_id: Option<usize>) -> Result<f64> {
        let (logits, cache) = self.forward_cached(p, &pair.input_coords)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, &pair.output_tokens, ignore_id)?;
        if let Some(g) = grads {
            self.backward(p, g, &cache, &dlogits)?;
        }
        Ok(loss)
    }
}
