//! Gated recurrent unit cell.
//!
//! Gate order inside the `3H` blocks is reset, update, candidate:
//!
//! ```text
//! r  = σ(x W_ir + b_ir + h W_hr + b_hr)
//! z  = σ(x W_iz + b_iz + h W_hz + b_hz)
//! n  = tanh(x W_in + b_in + r ⊙ (h W_hn + b_hn))
//! h' = (1 - z) ⊙ n + z ⊙ h
//! ```
//!
//! Weights use the `[in, out]` layout of the linear layers.

use crate::nn::layers::sigmoid;
use crate::nn::Tensor;

pub struct GruWeights<'a> {
    pub w_ih: &'a Tensor,
    pub w_hh: &'a Tensor,
    pub b_ih: &'a Tensor,
    pub b_hh: &'a Tensor,
}

/// Gradient buffers matching [`GruWeights`].
#[derive(Debug, Clone)]
pub struct GruGrads {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b_ih: Tensor,
    pub b_hh: Tensor,
}

impl GruGrads {
    pub fn zeros_like(w: &GruWeights<'_>) -> Self {
        Self {
            w_ih: Tensor::zeros(w.w_ih.shape()),
            w_hh: Tensor::zeros(w.w_hh.shape()),
            b_ih: Tensor::zeros(w.b_ih.shape()),
            b_hh: Tensor::zeros(w.b_hh.shape()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GruCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    gh_n: Vec<f64>,
}

/// `x · W + b` for a single row.
pub(crate) fn vecmat(x: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (rows, cols) = w.dims2();
    debug_assert_eq!(rows, x.len());
    let mut out = b.data().to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        out.iter_mut().zip(&w.data()[i * cols..(i + 1) * cols]).for_each(|(o, wv)| *o += xi * wv);
    }
    out
}

/// `W · g` for `W: [rows, cols]`, `g: [cols]`.
pub(crate) fn matvec(w: &Tensor, g: &[f64]) -> Vec<f64> {
    let (rows, cols) = w.dims2();
    (0..rows).map(|i| w.data()[i * cols..(i + 1) * cols].iter().zip(g).map(|(a, b)| a * b).sum()).collect()
}

/// `dW += x ⊗ g`.
pub(crate) fn add_outer(dw: &mut Tensor, x: &[f64], g: &[f64]) {
    let cols = g.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        dw.data_mut()[i * cols..(i + 1) * cols].iter_mut().zip(g).for_each(|(d, gv)| *d += xi * gv);
    }
}

pub fn gru_step(x: &[f64], h: &[f64], w: &GruWeights<'_>) -> (Vec<f64>, GruCache) {
    let hs = h.len();
    let gi = vecmat(x, w.w_ih, w.b_ih);
    let gh = vecmat(h, w.w_hh, w.b_hh);
    let mut r = vec![0.0; hs];
    let mut z = vec![0.0; hs];
    let mut n = vec![0.0; hs];
    let mut h_new = vec![0.0; hs];
    for j in 0..hs {
        r[j] = sigmoid(gi[j] + gh[j]);
        z[j] = sigmoid(gi[hs + j] + gh[hs + j]);
        n[j] = (gi[2 * hs + j] + r[j] * gh[2 * hs + j]).tanh();
        h_new[j] = (1.0 - z[j]) * n[j] + z[j] * h[j];
    }
    let cache = GruCache { x: x.to_vec(), h_prev: h.to_vec(), r, z, n, gh_n: gh[2 * hs..].to_vec() };
    (h_new, cache)
}

/// Backpropagates `dh_new` through one step; accumulates weight gradients
/// and returns `(dx, dh_prev)`.
pub fn gru_step_backward(cache: &GruCache, dh_new: &[f64], w: &GruWeights<'_>, grads: &mut GruGrads) -> (Vec<f64>, Vec<f64>) {
    let hs = dh_new.len();
    let mut dgi = vec![0.0; 3 * hs];
    let mut dgh = vec![0.0; 3 * hs];
    let mut dh_prev = vec![0.0; hs];
    for j in 0..hs {
        let (r, z, n) = (cache.r[j], cache.z[j], cache.n[j]);
        let dn = dh_new[j] * (1.0 - z);
        let dz = dh_new[j] * (cache.h_prev[j] - n);
        dh_prev[j] = dh_new[j] * z;
        let da_n = dn * (1.0 - n * n);
        let dr = da_n * cache.gh_n[j];
        let da_r = dr * r * (1.0 - r);
        let da_z = dz * z * (1.0 - z);
        dgi[j] = da_r;
        dgh[j] = da_r;
        dgi[hs + j] = da_z;
        dgh[hs + j] = da_z;
        dgi[2 * hs + j] = da_n;
        dgh[2 * hs + j] = da_n * r;
    }
    add_outer(&mut grads.w_ih, &cache.x, &dgi);
    add_outer(&mut grads.w_hh, &cache.h_prev, &dgh);
    grads.b_ih.data_mut().iter_mut().zip(&dgi).for_each(|(a, b)| *a += b);
    grads.b_hh.data_mut().iter_mut().zip(&dgh).for_each(|(a, b)| *a += b);
    let dx = matvec(w.w_ih, &dgi);
    let dh_from_gates = matvec(w.w_hh, &dgh);
    dh_prev.iter_mut().zip(&dh_from_gates).for_each(|(a, b)| *a += b);
    (dx, dh_prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_halve_the_state() {
        // r = z = 0.5, n = 0 => h' = 0.5 h
        let w_ih = Tensor::zeros(&[2, 6]);
        let w_hh = Tensor::zeros(&[2, 6]);
        let b = Tensor::zeros(&[6]);
        let w = GruWeights { w_ih: &w_ih, w_hh: &w_hh, b_ih: &b, b_hh: &b };
        let (h, _) = gru_step(&[1.0, -1.0], &[0.8, -0.4], &w);
        assert_eq!(h, vec![0.4, -0.2]);
    }
}
