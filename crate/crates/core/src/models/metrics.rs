use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{log_softmax, Tensor};

/// `exp(-(1/t) Σ ln p_i)` over the probabilities assigned to each target
/// token. A zero probability gives `+∞`.
pub fn perplexity_from_probs(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::invalid("perplexity of an empty corpus"));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("probabilities must lie in [0, 1]"));
    }
    if probs.contains(&0.0) {
        return Ok(f64::INFINITY);
    }
    let mean_nll = -probs.iter().map(|p| p.ln()).sum::<f64>() / probs.len() as f64;
    Ok(mean_nll.exp())
}

/// Perplexity from a total negative log-likelihood over `tokens` targets.
pub fn perplexity_from_nll(total_nll: f64, tokens: usize) -> Result<f64> {
    if tokens == 0 {
        return Err(Error::invalid("perplexity of an empty corpus"));
    }
    Ok((total_nll / tokens as f64).exp())
}

/// Summed negative log-likelihood of `targets` under `softmax(logits)`,
/// `+∞` when a target has zero probability.
pub fn sequence_nll(logits: &Tensor, targets: &[usize]) -> Result<f64> {
    let (rows, vocab) = logits.dims2();
    if rows != targets.len() {
        return Err(Error::ShapeMismatch { op: "sequence_nll", left: logits.shape().to_vec(), right: vec![targets.len()] });
    }
    let mut nll = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        if t >= vocab {
            return Err(Error::IdOutOfRange { id: t, vocab });
        }
        nll -= log_softmax(logits.row(i))[t];
    }
    Ok(nll)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    /// Exact-match fraction over every position, pads included.
    pub all: f64,
    /// Exact-match fraction over positions whose target is not the pad id;
    /// `None` when every target is a pad.
    pub non_pad: Option<f64>,
}

pub fn token_accuracy(predicted: &[usize], target: &[usize], pad_id: usize) -> Result<Accuracy> {
    if predicted.len() != target.len() {
        return Err(Error::ShapeMismatch { op: "token_accuracy", left: vec![predicted.len()], right: vec![target.len()] });
    }
    if target.is_empty() {
        return Err(Error::invalid("token accuracy of empty sequences"));
    }
    let hits = predicted.iter().zip(target).filter(|(p, t)| p == t).count();
    let real: Vec<_> = predicted.iter().zip(target).filter(|(_, &t)| t != pad_id).collect();
    let non_pad = (!real.is_empty()).then(|| real.iter().filter(|(p, t)| p == t).count() as f64 / real.len() as f64);
    Ok(Accuracy { all: hits as f64 / target.len() as f64, non_pad })
}

/// Fraction of predictions equal to `pad_id`.
pub fn pad_fraction(predicted: &[usize], pad_id: usize) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    predicted.iter().filter(|&&p| p == pad_id).count() as f64 / predicted.len() as f64
}

/// One row of the metric history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_ppl: Option<f64>,
    pub val_acc: Option<f64>,
}

/// CSV with header `epoch,train_loss,val_loss,val_ppl,val_acc`; missing
/// values are empty fields.
pub fn write_metrics_csv<W: Write>(rows: &[EpochMetrics], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_loss", "val_loss", "val_ppl", "val_acc"]).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([r.epoch.to_string(), r.train_loss.to_string(), opt(r.val_loss), opt(r.val_ppl), opt(r.val_acc)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: std::io::Read>(reader: R) -> Result<Vec<EpochMetrics>> {
    let mut r = csv::Reader::from_reader(reader);
    let parse = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::Parse(format!("bad metric value `{s}`")))
        }
    };
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            Ok(EpochMetrics {
                epoch: field(0).parse().map_err(|_| Error::Parse(format!("bad epoch `{}`", field(0))))?,
                train_loss: parse(field(1))?.ok_or_else(|| Error::Parse("missing train_loss".into()))?,
                val_loss: parse(field(2))?,
                val_ppl: parse(field(3))?,
                val_acc: parse(field(4))?,
            })
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_perplexity() {
        let ppl = perplexity_from_probs(&[0.5, 0.125]).unwrap();
        assert!((ppl - 4.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_impossible() {
        assert_eq!(perplexity_from_probs(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(perplexity_from_probs(&[0.5, 0.0]).unwrap(), f64::INFINITY);
        assert!(perplexity_from_probs(&[]).is_err());
    }

    #[test]
    fn uniform_logits() {
        let v = 121;
        let logits = Tensor::zeros(&[3, v]);
        let nll = sequence_nll(&logits, &[0, 5, 120]).unwrap();
        assert!((perplexity_from_nll(nll, 3).unwrap() - v as f64).abs() < 1e-9);
    }

    #[test]
    fn accuracies() {
        let t: Vec<usize> = (0..14).chain([17, 17, 17]).collect();
        let all_pad = vec![17; 17];
        let a = token_accuracy(&all_pad, &t, 17).unwrap();
        assert!((a.all - 3.0 / 17.0).abs() < 1e-15);
        assert_eq!(a.non_pad, Some(0.0));
        assert_eq!(token_accuracy(&t, &t, 17).unwrap().all, 1.0);
        assert!(token_accuracy(&t[..3], &t, 17).is_err());
        assert_eq!(pad_fraction(&all_pad, 17), 1.0);
    }

    #[test]
    fn metrics_csv_round_trip() {
        let rows = vec![
            EpochMetrics { epoch: 1, train_loss: 2.5, val_loss: Some(2.25), val_ppl: Some(9.487735836358526), val_acc: Some(0.1) },
            EpochMetrics { epoch: 2, train_loss: 1.0 / 3.0, val_loss: None, val_ppl: None, val_acc: None },
        ];
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss,val_ppl,val_acc\n"));
        assert!(text.contains("\n2,0.3333333333333333,,,\n"));
        assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), rows);
    }
}
