//! Masked scaled dot-product attention.
//!
//! Only unmasked key positions ever enter the arithmetic of a query row, so
//! with a causal mask the output at position `i` is bit-identical no matter
//! what the inputs at positions `> i` hold.

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Boolean `(len_q, len_k)` mask; `true` means the key is visible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    allowed: Vec<bool>,
}

impl Mask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self { rows, cols, allowed: vec![true; rows * cols] }
    }

    /// Query `i` sees keys `0..=i`.
    pub fn causal(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| j <= i)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let allowed = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self { rows, cols, allowed }
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.cols + j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub output: Tensor,
    /// Attention weights, zero at masked positions.
    pub probs: Tensor,
    /// Query rows with no visible key; their output is zero.
    pub fully_masked_rows: Vec<usize>,
}

/// `softmax(QKᵀ/√d + mask) V` for `Q: [lq, d]`, `K: [lk, d]`, `V: [lk, dv]`.
pub fn scaled_dot_attention(q: &Tensor, k: &Tensor, v: &Tensor, mask: &Mask) -> Result<AttentionOutput> {
    let (lq, d) = q.dims2();
    let (lk, dk) = k.dims2();
    let (lv, dv) = v.dims2();
    if d != dk {
        return Err(Error::ShapeMismatch { op: "attention q/k", left: q.shape().to_vec(), right: k.shape().to_vec() });
    }
    if lk != lv {
        return Err(Error::ShapeMismatch { op: "attention k/v", left: k.shape().to_vec(), right: v.shape().to_vec() });
    }
    if mask.shape() != (lq, lk) {
        return Err(Error::ShapeMismatch {
            op: "attention mask",
            left: vec![mask.rows, mask.cols],
            right: vec![lq, lk],
        });
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut probs = Tensor::zeros(&[lq, lk]);
    let mut output = Tensor::zeros(&[lq, dv]);
    let mut fully_masked_rows = Vec::new();
    let mut scores = vec![0.0; lk];
    for i in 0..lq {
        let qi = q.row(i);
        let mut max = f64::NEG_INFINITY;
        let mut any = false;
        for j in 0..lk {
            if mask.allows(i, j) {
                let s = qi.iter().zip(k.row(j)).map(|(a, b)| a * b).sum::<f64>() * scale;
                scores[j] = s;
                max = max.max(s);
                any = true;
            }
        }
        if !any {
            log::warn!("attention row {i} is fully masked; emitting zeros");
            fully_masked_rows.push(i);
            continue;
        }
        let mut total = 0.0;
        for j in 0..lk {
            if mask.allows(i, j) {
                let e = (scores[j] - max).exp();
                scores[j] = e;
                total += e;
            }
        }
        let p_row = probs.row_mut(i);
        for j in 0..lk {
            if mask.allows(i, j) {
                p_row[j] = scores[j] / total;
            }
        }
        let out_row = output.row_mut(i);
        for j in 0..lk {
            if mask.allows(i, j) {
                let p = probs.row(i)[j];
                out_row.iter_mut().zip(v.row(j)).for_each(|(o, vv)| *o += p * vv);
            }
        }
    }
    Ok(AttentionOutput { output, probs, fully_masked_rows })
}

#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub dq: Tensor,
    pub dk: Tensor,
    pub dv: Tensor,
}

pub fn scaled_dot_attention_backward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    probs: &Tensor,
    dout: &Tensor,
) -> AttentionGrads {
    let (lq, d) = q.dims2();
    let (lk, _) = k.dims2();
    let scale = 1.0 / (d as f64).sqrt();
    let mut dq = Tensor::zeros(q.shape());
    let mut dk = Tensor::zeros(k.shape());
    let mut dv = Tensor::zeros(v.shape());
    let mut dp = vec![0.0; lk];
    for i in 0..lq {
        let p = probs.row(i);
        let go = dout.row(i);
        let mut weighted = 0.0;
        for j in 0..lk {
            if p[j] == 0.0 {
                dp[j] = 0.0;
                continue;
            }
            dp[j] = go.iter().zip(v.row(j)).map(|(a, b)| a * b).sum();
            weighted += p[j] * dp[j];
            dv.row_mut(j).iter_mut().zip(go).for_each(|(g, o)| *g += p[j] * o);
        }
        for j in 0..lk {
            if p[j] == 0.0 {
                continue;
            }
            let ds = p[j] * (dp[j] - weighted) * scale;
            dq.row_mut(i).iter_mut().zip(k.row(j)).for_each(|(g, kk)| *g += ds * kk);
            dk.row_mut(j).iter_mut().zip(q.row(i)).for_each(|(g, qq)| *g += ds * qq);
        }
    }
    AttentionGrads { dq, dk, dv }
}

/// Per-head attention over column blocks of already-projected `Q`, `K`, `V`.
#[derive(Debug, Clone)]
pub struct MultiHeadCache {
    heads: Vec<Tensor>,
}

pub fn multi_head_forward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    heads: usize,
    mask: &Mask,
) -> Result<(Tensor, MultiHeadCache)> {
    let width = q.cols();
    if heads == 0 || !width.is_multiple_of(heads) {
        return Err(Error::invalid(format!("width {width} is not divisible by {heads} heads")));
    }
    let hd = width / heads;
    let mut out = Tensor::zeros(&[q.rows(), v.cols()]);
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let r = scaled_dot_attention(&q.columns(h * hd, hd), &k.columns(h * hd, hd), &v.columns(h * hd, hd), mask)?;
        out.set_columns(h * hd, &r.output);
        probs.push(r.probs);
    }
    Ok((out, MultiHeadCache { heads: probs }))
}

pub fn multi_head_backward(q: &Tensor, k: &Tensor, v: &Tensor, cache: &MultiHeadCache, dout: &Tensor) -> AttentionGrads {
    let heads = cache.heads.len();
    let hd = q.cols() / heads;
    let mut dq = Tensor::zeros(q.shape());
    let mut dk = Tensor::zeros(k.shape());
    let mut dv = Tensor::zeros(v.shape());
    for (h, probs) in cache.heads.iter().enumerate() {
        let g = scaled_dot_attention_backward(
            &q.columns(h * hd, hd),
            &k.columns(h * hd, hd),
            &v.columns(h * hd, hd),
            probs,
            &dout.columns(h * hd, hd),
        );
        dq.set_columns(h * hd, &g.dq);
        dk.set_columns(h * hd, &g.dk);
        dv.set_columns(h * hd, &g.dv);
    }
    AttentionGrads { dq, dk, dv }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(r: usize, c: usize, d: &[f64]) -> Tensor {
        Tensor::matrix(r, c, d.to_vec()).unwrap()
    }

    #[test]
    fn single_visible_key_returns_its_value() {
        let q = t(1, 2, &[0.3, -0.2]);
        let k = t(3, 2, &[1., 2., 3., 4., 5., 6.]);
        let v = t(3, 2, &[10., 11., 20., 21., 30., 31.]);
        let mask = Mask::from_fn(1, 3, |_, j| j == 1);
        let out = scaled_dot_attention(&q, &k, &v, &mask).unwrap();
        assert_eq!(out.output.data(), &[20., 21.]);
    }

    #[test]
    fn uniform_keys_average_visible_values() {
        let q = t(2, 2, &[1., 1., 1., 1.]);
        let k = t(3, 2, &[1., 1., 1., 1., 1., 1.]);
        let v = t(3, 1, &[3., 6., 100.]);
        let mask = Mask::from_fn(2, 3, |_, j| j < 2);
        let out = scaled_dot_attention(&q, &k, &v, &mask).unwrap();
        assert!((out.output.data()[0] - 4.5).abs() < 1e-12);
        assert!((out.output.data()[1] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one() {
        let q = t(3, 2, &[0.1, 0.5, -1.0, 2.0, 0.3, 0.3]);
        let k = t(3, 2, &[1.0, -0.5, 0.2, 0.2, 3.0, 1.0]);
        let v = t(3, 1, &[1., 2., 3.]);
        let out = scaled_dot_attention(&q, &k, &v, &Mask::causal(3)).unwrap();
        for i in 0..3 {
            let s: f64 = out.probs.row(i).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            for j in (i + 1)..3 {
                assert_eq!(out.probs.row(i)[j], 0.0);
            }
        }
    }

    #[test]
    fn fully_masked_row_is_zero() {
        let q = t(2, 1, &[1., 1.]);
        let k = t(2, 1, &[1., 1.]);
        let v = t(2, 1, &[5., 7.]);
        let mask = Mask::from_fn(2, 2, |i, _| i == 1);
        let out = scaled_dot_attention(&q, &k, &v, &mask).unwrap();
        assert_eq!(out.fully_masked_rows, vec![0]);
        assert_eq!(out.output.data()[0], 0.0);
        assert!(out.output.all_finite());
    }

    #[test]
    fn mask_shape_checked() {
        let q = t(2, 1, &[1., 1.]);
        assert!(scaled_dot_attention(&q, &q, &q, &Mask::causal(3)).is_err());
    }
}
