//! Autoregressive hold-order transformer.
//!
//! Input positions carry a token embedding plus the sinusoidal embedding of
//! the hold coordinates; blocks attend causally and a linear head scores the
//! `max_holds + 1` token ids (the last one is the pad).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{format_autoregressive_pair, pad_with, OrderedHoldsExample, PadStrategy, TokenizedPair, PAD_COORD};
use crate::error::{Error, Result};
use crate::models::OrderModel;
use crate::nn::modules::{Embedding, Linear, TransformerBlock, TransformerBlockCache};
use crate::nn::posemb::{coordinate_embedding, DEFAULT_BASE, DEFAULT_POS_SCALE};
use crate::nn::{argmax, softmax_cross_entropy, Mask, ParamStore, Params, Tensor};
use crate::sequence::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtConfig {
    pub max_holds: usize,
    pub dim: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn_hidden: usize,
    #[serde(default)]
    pub layer_norm: bool,
    pub pos_scale: f64,
    pub pos_base: f64,
    #[serde(default)]
    pub pad_strategy: PadStrategy,
}

impl Default for ArtConfig {
    fn default() -> Self {
        Self {
            max_holds: 17,
            dim: 128,
            heads: 4,
            blocks: 2,
            ffn_hidden: 256,
            layer_norm: false,
            pos_scale: DEFAULT_POS_SCALE,
            pos_base: DEFAULT_BASE,
            pad_strategy: PadStrategy::Imaginary,
        }
    }
}

impl ArtConfig {
    pub fn pad_id(&self) -> usize {
        self.max_holds
    }

    pub fn vocab(&self) -> usize {
        self.max_holds + 1
    }

    /// Length of a padded concatenated sequence.
    pub fn seq_len(&self) -> usize {
        2 * self.max_holds - 1
    }

    fn validate(&self) -> Result<()> {
        if self.max_holds < 2 || self.blocks == 0 || self.ffn_hidden == 0 {
            return Err(Error::invalid("art config needs max_holds >= 2, blocks >= 1 and ffn_hidden >= 1"));
        }
        if self.dim == 0 || !self.dim.is_multiple_of(4) {
            return Err(Error::invalid(format!("art dim must be a positive multiple of 4, got {}", self.dim)));
        }
        if self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!("dim {} is not divisible by {} heads", self.dim, self.heads)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ArtModel {
    cfg: ArtConfig,
    tok: Embedding,
    blocks: Vec<TransformerBlock>,
    head: Linear,
}

struct ForwardCache {
    blocks: Vec<TransformerBlockCache>,
    hidden: Tensor,
}

/// How generation fills the not-yet-predicted slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotInit {
    Zeros,
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    pub init: SlotInit,
    /// Forbid ids already predicted earlier in the sequence.
    pub exclude_used: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { init: SlotInit::Zeros, exclude_used: false }
    }
}

impl ArtModel {
    pub fn new(cfg: ArtConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            tok: Embedding::new("tok"),
            blocks: (0..cfg.blocks).map(|i| TransformerBlock::new(&format!("block{i}"), cfg.heads, cfg.layer_norm)).collect(),
            head: Linear::new("head"),
            cfg,
        })
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        self.tok.init(&mut store, self.cfg.vocab(), self.cfg.dim, &mut rng);
        for b in &self.blocks {
            b.init(&mut store, self.cfg.dim, self.cfg.ffn_hidden, &mut rng);
        }
        self.head.init(&mut store, self.cfg.dim, self.cfg.vocab(), &mut rng);
        store
    }

    pub fn config(&self) -> &ArtConfig {
        &self.cfg
    }

    /// Token embedding plus coordinate embedding at every position.
    pub fn input_embedding(&self, p: &Params, tokens: &[usize], coords: &[Point]) -> Result<Tensor> {
        if tokens.len() != coords.len() {
            return Err(Error::ShapeMismatch { op: "art input", left: vec![tokens.len()], right: vec![coords.len()] });
        }
        if tokens.is_empty() {
            return Err(Error::invalid("empty token sequence"));
        }
        let mut x = self.tok.forward(p, tokens)?;
        for (i, c) in coords.iter().enumerate() {
            let pe = coordinate_embedding(*c, self.cfg.dim, self.cfg.pos_scale, self.cfg.pos_base)?;
            x.row_mut(i).iter_mut().zip(&pe).for_each(|(a, b)| *a += b);
        }
        Ok(x)
    }

    fn forward_cached(&self, p: &Params, tokens: &[usize], coords: &[Point]) -> Result<(Tensor, ForwardCache)> {
        let mut h = self.input_embedding(p, tokens, coords)?;
        let mask = Mask::causal(tokens.len());
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(p, &h, &mask)?;
            caches.push(c);
            h = y;
        }
        let logits = self.head.forward(p, &h)?;
        Ok((logits, ForwardCache { blocks: caches, hidden: h }))
    }

    /// Logits `[len, max_holds + 1]` for every position.
    pub fn forward(&self, p: &Params, tokens: &[usize], coords: &[Point]) -> Result<Tensor> {
        Ok(self.forward_cached(p, tokens, coords)?.0)
    }

    fn backward(&self, p: &Params, g: &mut Params, tokens: &[usize], cache: &ForwardCache, dlogits: &Tensor) -> Result<()> {
        let mut dh = self.head.backward(p, g, &cache.hidden, dlogits)?;
        for (b, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            dh = b.backward(p, g, c, &dh)?;
        }
        self.tok.backward(p, g, tokens, &dh)
    }

    /// Fills the sorted segment one slot at a time by argmax over the hold
    /// ids `0..n` and the pad id. Returns the `n` predicted ids.
    pub fn generate(&self, p: &Params, holds: &[Point], opts: GenerateOptions) -> Result<Vec<usize>> {
        let n = holds.len();
        if n < 2 {
            return Err(Error::invalid(format!("ordering needs at least 2 holds, got {n}")));
        }
        if n > self.cfg.max_holds {
            return Err(Error::invalid(format!("{n} holds exceed the model limit of {}", self.cfg.max_holds)));
        }
        let pad = self.cfg.pad_id();
        let len = self.cfg.seq_len();
        let mut tokens: Vec<usize> = (0..n).collect();
        let mut coords: Vec<Point> = holds.to_vec();
        let mut rng = match opts.init {
            SlotInit::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            SlotInit::Zeros => None,
        };
        for _ in n..len {
            let t = match rng.as_mut() {
                Some(r) => r.gen_range(0..=pad),
                None => 0,
            };
            tokens.push(t);
            coords.push(if t == pad { PAD_COORD } else if t < n { holds[t] } else { Point::new(0.0, 0.0) });
        }

        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let pos = n - 1 + k;
            let logits = self.forward(p, &tokens, &coords)?;
            let row = logits.row(pos);
            let allowed: Vec<usize> =
                (0..n).chain([pad]).filter(|id| !(opts.exclude_used && *id != pad && out.contains(id))).collect();
            let scores: Vec<f64> = allowed.iter().map(|&id| row[id]).collect();
            let pick = allowed[argmax(&scores)];
            out.push(pick);
            if pos + 1 < len {
                tokens[pos + 1] = pick;
                coords[pos + 1] = if pick == pad { PAD_COORD } else { holds[pick] };
            }
        }
        Ok(out)
    }
}

impl OrderModel for ArtModel {
    const NAME: &'static str = "art";
    type Config = ArtConfig;

    fn from_config(cfg: ArtConfig) -> Result<Self> {
        ArtModel::new(cfg)
    }

    fn config(&self) -> &ArtConfig {
        &self.cfg
    }

    fn init_params(&self, seed: u64) -> ParamStore {
        ArtModel::init_params(self, seed)
    }

    fn pad_id(&self) -> usize {
        self.cfg.pad_id()
    }

    fn prepare(&self, ex: &OrderedHoldsExample) -> Result<TokenizedPair> {
        let pair = format_autoregressive_pair(ex, self.cfg.pad_id())?;
        pad_with(&pair, self.cfg.seq_len(), self.cfg.pad_id(), self.cfg.pad_strategy)
    }

    fn logits(&self, p: &Params, pair: &TokenizedPair) -> Result<Tensor> {
        self.forward(p, &pair.input_tokens, &pair.input_coords)
    }

    fn loss(&self, p: &Params, grads: Option<&mut Params>, pair: &TokenizedPair, ignore_id: Option<usize>) -> Result<f64> {
        let (logits, cache) = self.forward_cached(p, &pair.input_tokens, &pair.input_coords)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, &pair.output_tokens, ignore_id)?;
        if let Some(g) = grads {
            self.backward(p, g, &pair.input_tokens, &cache, &dlogits)?;
        }
        Ok(loss)
    }
}
