//! Layers bound to parameter names inside a [`ParamStore`].
//!
//! Each module only stores the names of its tensors; forward passes read
//! from [`Params`] and backward passes accumulate into a gradient [`Params`].

use rand::Rng;

use crate::error::Result;
use crate::nn::attention::{multi_head_backward, multi_head_forward, Mask, MultiHeadCache};
use crate::nn::layers::{
    embedding_backward, embedding_forward, gelu_backward, gelu_forward, layer_norm_backward, layer_norm_forward,
    linear_backward, linear_forward, LayerNormCache,
};
use crate::nn::{ParamStore, Params, Tensor};

#[derive(Debug, Clone)]
pub struct Linear {
    w: String,
    b: String,
}

impl Linear {
    pub fn new(prefix: &str) -> Self {
        Self { w: format!("{prefix}.w"), b: format!("{prefix}.b") }
    }

    pub fn init<R: Rng>(&self, store: &mut ParamStore, d_in: usize, d_out: usize, rng: &mut R) {
        store.init_uniform(&self.w, &[d_in, d_out], d_in, rng);
        store.init_uniform(&self.b, &[d_out], d_in, rng);
    }

    pub fn forward(&self, p: &Params, x: &Tensor) -> Result<Tensor> {
        linear_forward(x, &p[&self.w], &p[&self.b])
    }

    pub fn backward(&self, p: &Params, g: &mut Params, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let grads = linear_backward(x, &p[&self.w], dy)?;
        g.add(&self.w, &grads.dw)?;
        g.add(&self.b, &grads.db)?;
        Ok(grads.dx)
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    table: String,
}

impl Embedding {
    pub fn new(name: &str) -> Self {
        Self { table: name.to_string() }
    }

    /// Table entries uniform in `[-1, 1]`.
    pub fn init<R: Rng>(&self, store: &mut ParamStore, vocab: usize, dim: usize, rng: &mut R) {
        store.init_uniform(&self.table, &[vocab, dim], 1, rng);
    }

    pub fn forward(&self, p: &Params, ids: &[usize]) -> Result<Tensor> {
        embedding_forward(ids, &p[&self.table])
    }

    pub fn backward(&self, p: &Params, g: &mut Params, ids: &[usize], dy: &Tensor) -> Result<()> {
        let d = embedding_backward(ids, dy, p[&self.table].shape())?;
        g.add(&self.table, &d)
    }

    pub fn row<'a>(&self, p: &'a Params, id: usize) -> &'a [f64] {
        p[&self.table].row(id)
    }

    pub fn add_row_grad(&self, g: &mut Params, id: usize, dy: &[f64]) {
        let t = g.get_mut(&self.table).expect("embedding grad");
        t.row_mut(id).iter_mut().zip(dy).for_each(|(a, b)| *a += b);
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    gamma: String,
    beta: String,
}

impl LayerNorm {
    pub fn new(prefix: &str) -> Self {
        Self { gamma: format!("{prefix}.gamma"), beta: format!("{prefix}.beta") }
    }

    pub fn init(&self, store: &mut ParamStore, dim: usize) {
        store.insert(self.gamma.clone(), Tensor::filled(&[dim], 1.0));
        store.insert(self.beta.clone(), Tensor::zeros(&[dim]));
    }

    pub fn forward(&self, p: &Params, x: &Tensor) -> Result<(Tensor, LayerNormCache)> {
        layer_norm_forward(x, &p[&self.gamma], &p[&self.beta])
    }

    pub fn backward(&self, p: &Params, g: &mut Params, cache: &LayerNormCache, dy: &Tensor) -> Result<Tensor> {
        let (dx, dgamma, dbeta) = layer_norm_backward(cache, &p[&self.gamma], dy);
        g.add(&self.gamma, &dgamma)?;
        g.add(&self.beta, &dbeta)?;
        Ok(dx)
    }
}

/// `Linear(d, h) -> GELU -> Linear(h, d)`.
#[derive(Debug, Clone)]
pub struct FeedForward {
    up: Linear,
    down: Linear,
}

#[derive(Debug, Clone)]
pub struct FeedForwardCache {
    x: Tensor,
    pre: Tensor,
    act: Tensor,
}

impl FeedForward {
    pub fn new(prefix: &str) -> Self {
        Self { up: Linear::new(&format!("{prefix}.up")), down: Linear::new(&format!("{prefix}.down")) }
    }

    pub fn init<R: Rng>(&self, store: &mut ParamStore, dim: usize, hidden: usize, rng: &mut R) {
        self.up.init(store, dim, hidden, rng);
        self.down.init(store, hidden, dim, rng);
    }

    pub fn forward(&self, p: &Params, x: &Tensor) -> Result<(Tensor, FeedForwardCache)> {
        let pre = self.up.forward(p, x)?;
        let act = gelu_forward(&pre);
        let y = self.down.forward(p, &act)?;
        Ok((y, FeedForwardCache { x: x.clone(), pre, act }))
    }

    pub fn backward(&self, p: &Params, g: &mut Params, cache: &FeedForwardCache, dy: &Tensor) -> Result<Tensor> {
        let d_act = self.down.backward(p, g, &cache.act, dy)?;
        let d_pre = gelu_backward(&cache.pre, &d_act);
        self.up.backward(p, g, &cache.x, &d_pre)
    }
}

/// Multi-head self-attention with output projection.
#[derive(Debug, Clone)]
pub struct SelfAttention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
}

#[derive(Debug, Clone)]
pub struct SelfAttentionCache {
    x: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: MultiHeadCache,
    mixed: Tensor,
}

impl SelfAttention {
    pub fn new(prefix: &str, heads: usize) -> Self {
        Self {
            q: Linear::new(&format!("{prefix}.q")),
            k: Linear::new(&format!("{prefix}.k")),
            v: Linear::new(&format!("{prefix}.v")),
            o: Linear::new(&format!("{prefix}.o")),
            heads,
        }
    }

    pub fn init<R: Rng>(&self, store: &mut ParamStore, dim: usize, rng: &mut R) {
        for l in [&self.q, &self.k, &self.v, &self.o] {
            l.init(store, dim, dim, rng);
        }
    }

    pub fn forward(&self, p: &Params, x: &Tensor, mask: &Mask) -> Result<(Tensor, SelfAttentionCache)> {
        let q = self.q.forward(p, x)?;
        let k = self.k.forward(p, x)?;
        let v = self.v.forward(p, x)?;
        let (mixed, heads) = multi_head_forward(&q, &k, &v, self.heads, mask)?;
        let y = self.o.forward(p, &mixed)?;
        Ok((y, SelfAttentionCache { x: x.clone(), q, k, v, heads, mixed }))
    }

    pub fn backward(&self, p: &Params, g: &mut Params, cache: &SelfAttentionCache, dy: &Tensor) -> Result<Tensor> {
        let d_mixed = self.o.backward(p, g, &cache.mixed, dy)?;
        let ag = multi_head_backward(&cache.q, &cache.k, &cache.v, &cache.heads, &d_mixed);
        let mut dx = self.q.backward(p, g, &cache.x, &ag.dq)?;
        dx.add_assign(&self.k.backward(p, g, &cache.x, &ag.dk)?)?;
        dx.add_assign(&self.v.backward(p, g, &cache.x, &ag.dv)?)?;
        Ok(dx)
    }
}

/// Residual block: `x + attn(norm(x))`, then `+ ffn(norm(·))`. The norms are
/// identity unless layer normalization is enabled.
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    attn: SelfAttention,
    ffn: FeedForward,
    norms: Option<(LayerNorm, LayerNorm)>,
}

#[derive(Debug, Clone)]
pub struct TransformerBlockCache {
    ln1: Option<LayerNormCache>,
    attn: SelfAttentionCache,
    ln2: Option<LayerNormCache>,
    ffn: FeedForwardCache,
}

impl TransformerBlock {
    pub fn new(prefix: &str, heads: usize, layer_norm: bool) -> Self {
        Self {
            attn: SelfAttention::new(&format!("{prefix}.attn"), heads),
            ffn: FeedForward::new(&format!("{prefix}.ffn")),
            norms: layer_norm.then(|| (LayerNorm::new(&format!("{prefix}.ln1")), LayerNorm::new(&format!("{prefix}.ln2")))),
        }
    }

    pub fn init<R: Rng>(&self, store: &mut ParamStore, dim: usize, ffn_hidden: usize, rng: &mut R) {
        self.attn.init(store, dim, rng);
        self.ffn.init(store, dim, ffn_hidden, rng);
        if let Some((a, b)) = &self.norms {
            a.init(store, dim);
            b.init(store, dim);
        }
    }

    pub fn forward(&self, p: &Params, x: &Tensor, mask: &Mask) -> Result<(Tensor, TransformerBlockCache)> {
        let (a_in, ln1) = match &self.norms {
            Some((n1, _)) => {
                let (y, c) = n1.forward(p, x)?;
                (y, Some(c))
            }
            None => (x.clone(), None),
        };
        let (a_out, attn) = self.attn.forward(p, &a_in, mask)?;
        let x1 = x.add(&a_out)?;
        let (f_in, ln2) = match &self.norms {
            Some((_, n2)) => {
                let (y, c) = n2.forward(p, &x1)?;
                (y, Some(c))
            }
            None => (x1.clone(), None),
        };
        let (f_out, ffn) = self.ffn.forward(p, &f_in)?;
        let y = x1.add(&f_out)?;
        Ok((y, TransformerBlockCache { ln1, attn, ln2, ffn }))
    }

    pub fn backward(&self, p: &Params, g: &mut Params, cache: &TransformerBlockCache, dy: &Tensor) -> Result<Tensor> {
        let mut d_f_in = self.ffn.backward(p, g, &cache.ffn, dy)?;
        if let (Some((_, n2)), Some(c)) = (&self.norms, &cache.ln2) {
            d_f_in = n2.backward(p, g, c, &d_f_in)?;
        }
        let dx1 = dy.add(&d_f_in)?;
        let mut d_a_in = self.attn.backward(p, g, &cache.attn, &dx1)?;
        if let (Some((n1, _)), Some(c)) = (&self.norms, &cache.ln1) {
            d_a_in = n1.backward(p, g, c, &d_a_in)?;
        }
        dx1.add(&d_a_in)
    }
}
