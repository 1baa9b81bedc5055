use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Numerically stable log-softmax of one row.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

/// Mean negative log-likelihood of `targets` under `softmax(logits)` and its
/// gradient with respect to the logits.
///
/// Rows whose target equals `ignore_id` contribute neither loss nor gradient;
/// the mean is taken over the remaining rows.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize], ignore_id: Option<usize>) -> Result<(f64, Tensor)> {
    let (rows, vocab) = logits.dims2();
    if rows != targets.len() {
        return Err(Error::ShapeMismatch { op: "cross_entropy", left: logits.shape().to_vec(), right: vec![targets.len()] });
    }
    let counted = targets.iter().filter(|&&t| Some(t) != ignore_id).count();
    if counted == 0 {
        return Err(Error::invalid("cross entropy: every position is ignored"));
    }
    let inv = 1.0 / counted as f64;
    let mut grad = Tensor::zeros(&[rows, vocab]);
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        if Some(t) == ignore_id {
            continue;
        }
        if t >= vocab {
            return Err(Error::IdOutOfRange { id: t, vocab });
        }
        let lp = log_softmax(logits.row(i));
        loss -= lp[t];
        let g = grad.row_mut(i);
        for (gj, l) in g.iter_mut().zip(&lp) {
            *gj = l.exp() * inv;
        }
        g[t] -= inv;
    }
    Ok((loss * inv, grad))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_v() {
        let logits = Tensor::zeros(&[3, 4]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 1, 3], None).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn confident_correct_logits_approach_zero() {
        let logits = Tensor::matrix(1, 3, vec![60.0, 0.0, 0.0]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0], None).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn ignored_rows_have_zero_gradient() {
        let logits = Tensor::matrix(2, 3, vec![0.1, 0.2, 0.3, 1.0, -1.0, 0.0]).unwrap();
        let (loss, g) = softmax_cross_entropy(&logits, &[2, 1], Some(1)).unwrap();
        assert_eq!(g.row(1), &[0.0, 0.0, 0.0]);
        let (alone, _) = softmax_cross_entropy(&Tensor::matrix(1, 3, vec![0.1, 0.2, 0.3]).unwrap(), &[2], None).unwrap();
        assert!((loss - alone).abs() < 1e-15);
    }

    #[test]
    fn all_ignored_is_error() {
        let logits = Tensor::zeros(&[2, 3]);
        assert!(softmax_cross_entropy(&logits, &[1, 1], Some(1)).is_err());
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
