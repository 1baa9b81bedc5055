//! Stateless forward/backward kernels for the dense layers.

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Gradients of `y = xW + b`.
#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

/// `y = xW + b` with `x: [n, in]`, `W: [in, out]`, `b: [out]`.
pub fn linear_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (_, d_out) = w.dims2();
    if b.len() != d_out {
        return Err(Error::ShapeMismatch { op: "linear bias", left: w.shape().to_vec(), right: b.shape().to_vec() });
    }
    let mut y = x.matmul(w).map_err(|_| Error::ShapeMismatch {
        op: "linear",
        left: x.shape().to_vec(),
        right: w.shape().to_vec(),
    })?;
    for i in 0..y.rows() {
        y.row_mut(i).iter_mut().zip(b.data()).for_each(|(v, bb)| *v += bb);
    }
    Ok(y)
}

pub fn linear_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<LinearGrads> {
    let dx = dy.matmul_t(w)?;
    let dw = x.t_matmul(dy)?.reshape(w.shape().to_vec())?;
    let db = dy.sum_rows();
    Ok(LinearGrads { dx, dw, db })
}

/// Row lookup: output row `i` is `table[ids[i]]`.
pub fn embedding_forward(ids: &[usize], table: &Tensor) -> Result<Tensor> {
    let (vocab, dim) = table.dims2();
    if ids.is_empty() {
        return Err(Error::invalid("embedding lookup of an empty id list"));
    }
    let mut data = Vec::with_capacity(ids.len() * dim);
    for &id in ids {
        if id >= vocab {
            return Err(Error::IdOutOfRange { id, vocab });
        }
        data.extend_from_slice(table.row(id));
    }
    Tensor::matrix(ids.len(), dim, data)
}

/// Scatters `dy` rows back onto the looked-up table rows.
pub fn embedding_backward(ids: &[usize], dy: &Tensor, table_shape: &[usize]) -> Result<Tensor> {
    let mut grad = Tensor::zeros(table_shape);
    let vocab = grad.rows();
    for (r, &id) in ids.iter().enumerate() {
        if id >= vocab {
            return Err(Error::IdOutOfRange { id, vocab });
        }
        grad.row_mut(id).iter_mut().zip(dy.row(r)).for_each(|(g, d)| *g += d);
    }
    Ok(grad)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

pub fn gelu_forward(x: &Tensor) -> Tensor {
    x.map(gelu)
}

pub fn gelu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let mut out = x.map(gelu_grad);
    out.data_mut().iter_mut().zip(dy.data()).for_each(|(g, d)| *g *= d);
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Tensor,
    inv_std: Vec<f64>,
}

/// Per-row normalization followed by `gamma * x̂ + beta`.
pub fn layer_norm_forward(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(Tensor, LayerNormCache)> {
    let (r, c) = x.dims2();
    if gamma.len() != c || beta.len() != c {
        return Err(Error::ShapeMismatch { op: "layer_norm", left: x.shape().to_vec(), right: gamma.shape().to_vec() });
    }
    let mut normalized = Tensor::zeros(&[r, c]);
    let mut out = Tensor::zeros(&[r, c]);
    let mut inv_std = Vec::with_capacity(r);
    for i in 0..r {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(is);
        for j in 0..c {
            let n = (row[j] - mean) * is;
            normalized.row_mut(i)[j] = n;
            out.row_mut(i)[j] = gamma.data()[j] * n + beta.data()[j];
        }
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn layer_norm_backward(cache: &LayerNormCache, gamma: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (r, c) = dy.dims2();
    let mut dx = Tensor::zeros(&[r, c]);
    let mut dgamma = Tensor::zeros(gamma.shape());
    let mut dbeta = Tensor::zeros(gamma.shape());
    for i in 0..r {
        let xh = cache.normalized.row(i);
        let g = dy.row(i);
        let mut dxh = vec![0.0; c];
        for j in 0..c {
            dgamma.data_mut()[j] += g[j] * xh[j];
            dbeta.data_mut()[j] += g[j];
            dxh[j] = g[j] * gamma.data()[j];
        }
        let mean_dxh = dxh.iter().sum::<f64>() / c as f64;
        let mean_dxh_xh = dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / c as f64;
        let is = cache.inv_std[i];
        for j in 0..c {
            dx.row_mut(i)[j] = is * (dxh[j] - mean_dxh - xh[j] * mean_dxh_xh);
        }
    }
    (dx, dgamma, dbeta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_passes_input() {
        let x = Tensor::matrix(2, 2, vec![0.3, -1.0, 2.0, 5.0]).unwrap();
        let w = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::zeros(&[2]);
        assert_eq!(linear_forward(&x, &w, &b).unwrap(), x);
    }

    #[test]
    fn hand_arithmetic() {
        let x = Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap();
        let w = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::vector(vec![3.0, 4.0]).unwrap();
        assert_eq!(linear_forward(&x, &w, &b).unwrap().data(), &[4.0, 6.0]);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let x = Tensor::zeros(&[1, 3]);
        let w = Tensor::zeros(&[2, 2]);
        let b = Tensor::zeros(&[2]);
        let msg = linear_forward(&x, &w, &b).unwrap_err().to_string();
        assert!(msg.contains("[1, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn embedding_lookup_and_scatter() {
        let table = Tensor::matrix(3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(embedding_forward(&[0], &table).unwrap().data(), &[1., 2.]);
        assert!(matches!(embedding_forward(&[3], &table), Err(Error::IdOutOfRange { id: 3, vocab: 3 })));
        let dy = Tensor::matrix(2, 2, vec![1., 1., 2., 2.]).unwrap();
        let g = embedding_backward(&[1, 1], &dy, &[3, 2]).unwrap();
        assert_eq!(g.data(), &[0., 0., 3., 3., 0., 0.]);
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let x = Tensor::matrix(1, 4, vec![1., 2., 3., 4.]).unwrap();
        let (y, _) = layer_norm_forward(&x, &Tensor::filled(&[4], 1.0), &Tensor::zeros(&[4])).unwrap();
        let mean: f64 = y.data().iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn gelu_grad_matches_difference() {
        for &x in &[-2.0, -0.3, 0.0, 0.7, 3.0] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }
}
