//! Holds-sentence to move-sentence translator: a GRU encoder and a GRU
//! decoder with additive attention over the encoder states.
//!
//! Decoder step `t` with previous state `s`, previous token `y`:
//!
//! ```text
//! e_j = v · tanh(s Wq + bq + h_j Wk)     α = softmax(e)     c = Σ α_j h_j
//! s'  = GRU([emb(y); c], s)              logits = s' Wo + bo
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::vocab::{holds_sentence, holds_sentence_of_moves, move_sentence, EOS, SOS, SPECIALS};
use crate::dataset::Vocab;
use crate::error::{Error, Result};
use crate::models::metrics::{token_accuracy, EpochMetrics};
use crate::models::train::{batch_gradients, save_checkpoint, TrainConfig, TrainOutcome};
use crate::nn::gru::{add_outer, gru_step, gru_step_backward, matvec, vecmat, GruCache, GruGrads, GruWeights};
use crate::nn::modules::Embedding;
use crate::nn::{argmax, log_softmax, Checkpoint, ParamStore, Params, Tensor};
use crate::sequence::{HoldsSequence, MoveSequence};

pub const MODEL_NAME: &str = "seq2seq";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqConfig {
    pub hidden: usize,
    pub embed: usize,
    pub decimals: u32,
    pub input_vocab: Vocab,
    pub output_vocab: Vocab,
}

impl Seq2SeqConfig {
    pub fn new(input_vocab: Vocab, output_vocab: Vocab) -> Self {
        Self { hidden: 512, embed: 512, decimals: 1, input_vocab, output_vocab }
    }
}

/// Encoded sentence pair; both sides end with EOS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedPair {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    cfg: Seq2SeqConfig,
    enc_emb: Embedding,
    dec_emb: Embedding,
}

struct StepCache {
    y_prev: usize,
    s_prev: Vec<f64>,
    /// `tanh(q + k_j)` for every source position.
    act: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    gru: GruCache,
    s: Vec<f64>,
    log_probs: Vec<f64>,
}

struct EncoderCache {
    states: Tensor,
    keys: Tensor,
    steps: Vec<GruCache>,
}

fn gru<'a>(p: &'a Params, prefix: &str) -> GruWeights<'a> {
    GruWeights {
        w_ih: &p[&format!("{prefix}.w_ih")],
        w_hh: &p[&format!("{prefix}.w_hh")],
        b_ih: &p[&format!("{prefix}.b_ih")],
        b_hh: &p[&format!("{prefix}.b_hh")],
    }
}

fn add_gru_grads(g: &mut Params, prefix: &str, grads: &GruGrads) -> Result<()> {
    g.add(&format!("{prefix}.w_ih"), &grads.w_ih)?;
    g.add(&format!("{prefix}.w_hh"), &grads.w_hh)?;
    g.add(&format!("{prefix}.b_ih"), &grads.b_ih)?;
    g.add(&format!("{prefix}.b_hh"), &grads.b_hh)
}

fn add_vec(g: &mut Params, name: &str, v: &[f64]) -> Result<()> {
    g.add(name, &Tensor::vector(v.to_vec())?)
}

impl Seq2SeqModel {
    pub fn new(cfg: Seq2SeqConfig) -> Result<Self> {
        if cfg.hidden == 0 || cfg.embed == 0 {
            return Err(Error::invalid("seq2seq hidden and embed sizes must be positive"));
        }
        Ok(Self { cfg, enc_emb: Embedding::new("enc.emb"), dec_emb: Embedding::new("dec.emb") })
    }

    pub fn config(&self) -> &Seq2SeqConfig {
        &self.cfg
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, e) = (self.cfg.hidden, self.cfg.embed);
        let mut s = ParamStore::new();
        self.enc_emb.init(&mut s, self.cfg.input_vocab.len(), e, &mut rng);
        self.dec_emb.init(&mut s, self.cfg.output_vocab.len(), e, &mut rng);
        for (prefix, d_in) in [("enc", e), ("dec", e + h)] {
            s.init_uniform(format!("{prefix}.w_ih"), &[d_in, 3 * h], h, &mut rng);
            s.init_uniform(format!("{prefix}.w_hh"), &[h, 3 * h], h, &mut rng);
            s.init_uniform(format!("{prefix}.b_ih"), &[3 * h], h, &mut rng);
            s.init_uniform(format!("{prefix}.b_hh"), &[3 * h], h, &mut rng);
        }
        s.init_uniform("attn.wq", &[h, h], h, &mut rng);
        s.init_uniform("attn.bq", &[h], h, &mut rng);
        s.init_uniform("attn.wk", &[h, h], h, &mut rng);
        s.init_uniform("attn.v", &[h], h, &mut rng);
        s.init_uniform("out.w", &[h, self.cfg.output_vocab.len()], h, &mut rng);
        s.init_uniform("out.b", &[self.cfg.output_vocab.len()], h, &mut rng);
        s
    }

    pub fn encode_pair(&self, holds_words: &[String], move_words: &[String]) -> EncodedPair {
        let mut src = self.cfg.input_vocab.encode(holds_words);
        src.push(EOS);
        let mut tgt = self.cfg.output_vocab.encode(move_words);
        tgt.push(EOS);
        EncodedPair { src, tgt }
    }

    /// Holds sentence (sorted by `y`, then `x`) and move sentence of a move
    /// sequence, encoded.
    pub fn encode_moves(&self, seq: &MoveSequence) -> Result<EncodedPair> {
        Ok(self.encode_pair(
            &holds_sentence_of_moves(seq, self.cfg.decimals)?,
            &move_sentence(seq, self.cfg.decimals)?,
        ))
    }

    fn encoder(&self, p: &Params, src: &[usize]) -> Result<EncoderCache> {
        let h = self.cfg.hidden;
        let w = gru(p, "enc");
        let mut state = vec![0.0; h];
        let mut rows = Vec::with_capacity(src.len());
        let mut steps = Vec::with_capacity(src.len());
        for &id in src {
            if id >= self.cfg.input_vocab.len() {
                return Err(Error::IdOutOfRange { id, vocab: self.cfg.input_vocab.len() });
            }
            let (next, c) = gru_step(self.enc_emb.row(p, id), &state, &w);
            steps.push(c);
            rows.push(next.clone());
            state = next;
        }
        let states = Tensor::from_rows(&rows)?;
        let keys = states.matmul(&p["attn.wk"])?;
        Ok(EncoderCache { states, keys, steps })
    }

    fn decoder_step(&self, p: &Params, enc: &EncoderCache, s_prev: &[f64], y_prev: usize) -> Result<StepCache> {
        if y_prev >= self.cfg.output_vocab.len() {
            return Err(Error::IdOutOfRange { id: y_prev, vocab: self.cfg.output_vocab.len() });
        }
        let q = vecmat(s_prev, &p["attn.wq"], &p["attn.bq"]);
        let v = p["attn.v"].data();
        let n_src = enc.states.rows();
        let mut act = Vec::with_capacity(n_src);
        let mut scores = Vec::with_capacity(n_src);
        for j in 0..n_src {
            let a: Vec<f64> = q.iter().zip(enc.keys.row(j)).map(|(qi, ki)| (qi + ki).tanh()).collect();
            scores.push(a.iter().zip(v).map(|(x, y)| x * y).sum::<f64>());
            act.push(a);
        }
        let alpha: Vec<f64> = log_softmax(&scores).into_iter().map(f64::exp).collect();
        let mut input = self.dec_emb.row(p, y_prev).to_vec();
        let mut context = vec![0.0; self.cfg.hidden];
        for (j, &a) in alpha.iter().enumerate() {
            context.iter_mut().zip(enc.states.row(j)).for_each(|(c, hj)| *c += a * hj);
        }
        input.extend_from_slice(&context);
        let (s, gcache) = gru_step(&input, s_prev, &gru(p, "dec"));
        let logits = vecmat(&s, &p["out.w"], &p["out.b"]);
        Ok(StepCache { y_prev, s_prev: s_prev.to_vec(), act, alpha, gru: gcache, s, log_probs: log_softmax(&logits) })
    }

    /// Runs the decoder over `tgt.len()` steps. With `teacher_forcing` the
    /// gold previous token is fed back, otherwise the argmax prediction.
    fn unroll(&self, p: &Params, src: &[usize], tgt: &[usize], teacher_forcing: bool) -> Result<(EncoderCache, Vec<StepCache>)> {
        if src.is_empty() || tgt.is_empty() {
            return Err(Error::invalid("seq2seq pairs need nonempty source and target"));
        }
        let enc = self.encoder(p, src)?;
        let mut s = enc.states.row(src.len() - 1).to_vec();
        let mut y = SOS;
        let mut steps = Vec::with_capacity(tgt.len());
        for &gold in tgt {
            if gold >= self.cfg.output_vocab.len() {
                return Err(Error::IdOutOfRange { id: gold, vocab: self.cfg.output_vocab.len() });
            }
            let step = self.decoder_step(p, &enc, &s, y)?;
            y = if teacher_forcing { gold } else { argmax(&step.log_probs) };
            s = step.s.clone();
            steps.push(step);
        }
        Ok((enc, steps))
    }

    /// Decoder inputs fed at each step (SOS first).
    pub fn decoder_inputs(&self, p: &Params, pair: &EncodedPair, teacher_forcing: bool) -> Result<Vec<usize>> {
        Ok(self.unroll(p, &pair.src, &pair.tgt, teacher_forcing)?.1.iter().map(|s| s.y_prev).collect())
    }

    /// Mean token cross-entropy of the pair; accumulates gradients when asked.
    pub fn loss(&self, p: &Params, grads: Option<&mut Params>, pair: &EncodedPair, teacher_forcing: bool) -> Result<f64> {
        let (enc, steps) = self.unroll(p, &pair.src, &pair.tgt, teacher_forcing)?;
        let t = pair.tgt.len() as f64;
        let loss = -steps.iter().zip(&pair.tgt).map(|(s, &g)| s.log_probs[g]).sum::<f64>() / t;
        if let Some(g) = grads {
            self.backward(p, g, pair, &enc, &steps)?;
        }
        Ok(loss)
    }

    fn backward(&self, p: &Params, g: &mut Params, pair: &EncodedPair, enc: &EncoderCache, steps: &[StepCache]) -> Result<()> {
        let (h, e) = (self.cfg.hidden, self.cfg.embed);
        let n_src = pair.src.len();
        let inv_t = 1.0 / pair.tgt.len() as f64;
        let dec_w = gru(p, "dec");
        let mut dec_g = GruGrads::zeros_like(&dec_w);
        let v = p["attn.v"].data();
        let mut d_out_w = Tensor::zeros(p["out.w"].shape());
        let mut d_out_b = vec![0.0; self.cfg.output_vocab.len()];
        let mut d_wq = Tensor::zeros(&[h, h]);
        let mut d_bq = vec![0.0; h];
        let mut d_v = vec![0.0; h];
        let mut d_keys = Tensor::zeros(&[n_src, h]);
        let mut d_states = Tensor::zeros(&[n_src, h]);
        let mut carry = vec![0.0; h];

        for (step, &gold) in steps.iter().zip(&pair.tgt).rev() {
            let mut dlogits: Vec<f64> = step.log_probs.iter().map(|lp| lp.exp() * inv_t).collect();
            dlogits[gold] -= inv_t;
            add_outer(&mut d_out_w, &step.s, &dlogits);
            d_out_b.iter_mut().zip(&dlogits).for_each(|(a, b)| *a += b);
            let mut ds = matvec(&p["out.w"], &dlogits);
            ds.iter_mut().zip(&carry).for_each(|(a, b)| *a += b);

            let (din, mut ds_prev) = gru_step_backward(&step.gru, &ds, &dec_w, &mut dec_g);
            self.dec_emb.add_row_grad(g, step.y_prev, &din[..e]);
            let dc = &din[e..];

            let d_alpha: Vec<f64> =
                (0..n_src).map(|j| enc.states.row(j).iter().zip(dc).map(|(a, b)| a * b).sum()).collect();
            for (j, &a) in step.alpha.iter().enumerate() {
                d_states.row_mut(j).iter_mut().zip(dc).for_each(|(d, c)| *d += a * c);
            }
            let mean: f64 = step.alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
            let mut dq = vec![0.0; h];
            for j in 0..n_src {
                let de = step.alpha[j] * (d_alpha[j] - mean);
                let act = &step.act[j];
                let dk = d_keys.row_mut(j);
                for i in 0..h {
                    d_v[i] += de * act[i];
                    let du = de * v[i] * (1.0 - act[i] * act[i]);
                    dq[i] += du;
                    dk[i] += du;
                }
            }
            add_outer(&mut d_wq, &step.s_prev, &dq);
            d_bq.iter_mut().zip(&dq).for_each(|(a, b)| *a += b);
            ds_prev.iter_mut().zip(matvec(&p["attn.wq"], &dq)).for_each(|(a, b)| *a += b);
            carry = ds_prev;
        }

        g.add("out.w", &d_out_w)?;
        add_vec(g, "out.b", &d_out_b)?;
        g.add("attn.wq", &d_wq)?;
        add_vec(g, "attn.bq", &d_bq)?;
        add_vec(g, "attn.v", &d_v)?;
        add_gru_grads(g, "dec", &dec_g)?;

        g.add("attn.wk", &enc.states.t_matmul(&d_keys)?)?;
        d_states.add_assign(&d_keys.matmul_t(&p["attn.wk"])?)?;
        d_states.row_mut(n_src - 1).iter_mut().zip(&carry).for_each(|(a, b)| *a += b);

        let enc_w = gru(p, "enc");
        let mut enc_g = GruGrads::zeros_like(&enc_w);
        let mut dh = d_states.row(n_src - 1).to_vec();
        for j in (0..n_src).rev() {
            let (dx, dh_prev) = gru_step_backward(&enc.steps[j], &dh, &enc_w, &mut enc_g);
            self.enc_emb.add_row_grad(g, pair.src[j], &dx);
            if j > 0 {
                dh = dh_prev.iter().zip(d_states.row(j - 1)).map(|(a, b)| a + b).collect();
            }
        }
        add_gru_grads(g, "enc", &enc_g)
    }

    /// Summed NLL and token count of the gold targets under teacher forcing.
    pub fn corpus_nll(&self, p: &Params, pairs: &[EncodedPair]) -> Result<(f64, usize)> {
        let mut nll = 0.0;
        let mut tokens = 0;
        for pair in pairs {
            let (_, steps) = self.unroll(p, &pair.src, &pair.tgt, true)?;
            nll -= steps.iter().zip(&pair.tgt).map(|(s, &g)| s.log_probs[g]).sum::<f64>();
            tokens += pair.tgt.len();
        }
        Ok((nll, tokens))
    }

    /// Per-token perplexity of the corpus under teacher forcing.
    pub fn perplexity(&self, p: &Params, pairs: &[EncodedPair]) -> Result<f64> {
        let (nll, tokens) = self.corpus_nll(p, pairs)?;
        crate::models::metrics::perplexity_from_nll(nll, tokens)
    }

    /// Greedy decoding from SOS until EOS or twice the input length; only
    /// content words and EOS can be emitted.
    pub fn translate_ids(&self, p: &Params, src_words: &[usize]) -> Result<Vec<usize>> {
        if src_words.is_empty() {
            return Ok(Vec::new());
        }
        let mut src = src_words.to_vec();
        src.push(EOS);
        let enc = self.encoder(p, &src)?;
        let mut s = enc.states.row(src.len() - 1).to_vec();
        let mut y = SOS;
        let mut out = Vec::new();
        let allowed: Vec<usize> = std::iter::once(EOS).chain(SPECIALS.len()..self.cfg.output_vocab.len()).collect();
        for _ in 0..2 * src_words.len() {
            let step = self.decoder_step(p, &enc, &s, y)?;
            let scores: Vec<f64> = allowed.iter().map(|&i| step.log_probs[i]).collect();
            let next = allowed[argmax(&scores)];
            if next == EOS {
                break;
            }
            out.push(next);
            y = next;
            s = step.s;
        }
        Ok(out)
    }

    pub fn translate(&self, p: &Params, holds_words: &[String]) -> Result<Vec<String>> {
        let ids = self.translate_ids(p, &self.cfg.input_vocab.encode(holds_words))?;
        Ok(ids.iter().map(|&i| self.cfg.output_vocab.word(i).expect("id from vocabulary").to_string()).collect())
    }

    /// Translates an unordered hold set.
    pub fn translate_holds(&self, p: &Params, holds: &HoldsSequence) -> Result<Vec<String>> {
        self.translate(p, &holds_sentence(&holds.holds, self.cfg.decimals)?)
    }

    pub fn checkpoint(&self, store: &ParamStore, train: Option<&TrainConfig>) -> Result<Checkpoint> {
        let train = train.map(serde_json::to_value).transpose()?;
        Ok(Checkpoint::from_store(MODEL_NAME, serde_json::to_value(&self.cfg)?, train, store))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, ParamStore)> {
        if ck.model != MODEL_NAME {
            return Err(Error::invalid(format!("checkpoint holds a `{}` model, expected `{MODEL_NAME}`", ck.model)));
        }
        let model = Self::new(serde_json::from_value(ck.config.clone())?)?;
        let store = ck.to_store()?;
        for (name, t) in model.init_params(0).values.iter() {
            match store.values.get(name) {
                Some(s) if s.shape() == t.shape() => {}
                _ => return Err(Error::invalid(format!("checkpoint is missing parameter `{name}` or has the wrong shape"))),
            }
        }
        Ok((model, store))
    }

    fn validation(&self, p: &Params, val: &[EncodedPair]) -> Result<(f64, f64, f64)> {
        let (nll, tokens) = self.corpus_nll(p, val)?;
        let loss = nll / tokens as f64;
        let mut preds = Vec::new();
        let mut gold = Vec::new();
        for pair in val {
            let (_, steps) = self.unroll(p, &pair.src, &pair.tgt, true)?;
            preds.extend(steps.iter().map(|s| argmax(&s.log_probs)));
            gold.extend_from_slice(&pair.tgt);
        }
        let acc = token_accuracy(&preds, &gold, usize::MAX)?.all;
        Ok((loss, loss.exp(), acc))
    }

    /// Adam over shuffled mini-batches. Teacher forcing is drawn once per
    /// sequence with probability `cfg.teacher_forcing`.
    pub fn train(&self, store: &mut ParamStore, train: &[EncodedPair], val: &[EncodedPair], cfg: &TrainConfig) -> Result<TrainOutcome> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::invalid("empty training corpus"));
        }
        let adam = cfg.adam();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        let mut best: Option<(usize, f64, ParamStore)> = None;

        for epoch in 1..=cfg.epochs {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let forcing: Vec<bool> = batch.iter().map(|_| rng.gen_bool(cfg.teacher_forcing)).collect();
                let (loss, grads) = batch_gradients(&store.values, batch.len(), |i, g| {
                    self.loss(&store.values, Some(g), &train[batch[i]], forcing[i])
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
                    let (loss, ppl, acc) = self.validation(&store.values, val)?;
                    row.val_loss = Some(loss);
                    row.val_ppl = Some(ppl);
                    row.val_acc = Some(acc);
                    loss
                };
                if best.as_ref().is_none_or(|b| selection < b.1) {
                    best = Some((epoch, selection, store.clone()));
                    if let Some(dir) = &cfg.checkpoint_dir {
                        save_checkpoint(dir, "best.json", &self.checkpoint(store, Some(cfg))?)?;
                    }
                }
            }
            history.push(row);
        }
        if let Some(dir) = &cfg.checkpoint_dir {
            save_checkpoint(dir, "latest.json", &self.checkpoint(store, Some(cfg))?)?;
            let f = std::fs::File::create(dir.join("metrics.csv"))?;
            crate::models::metrics::write_metrics_csv(&history, f)?;
        }
        let (best_epoch, best_loss, best_store) = best.expect("at least one evaluation epoch");
        Ok(TrainOutcome { history, best_epoch, best_loss, best: best_store, latest: store.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Seq2SeqModel {
        let input = Vocab::from_words(["0.1_0.2", "0.3_0.4"]);
        let output = Vocab::from_words(["LH_0.1_0.2", "RH_0.3_0.4"]);
        Seq2SeqModel::new(Seq2SeqConfig { hidden: 6, embed: 4, ..Seq2SeqConfig::new(input, output) }).unwrap()
    }

    #[test]
    fn empty_input_translates_to_nothing() {
        let m = tiny();
        let s = m.init_params(0);
        assert!(m.translate(&s.values, &[]).unwrap().is_empty());
    }

    #[test]
    fn outputs_are_move_words() {
        let m = tiny();
        let s = m.init_params(5);
        let words = m.translate(&s.values, &["0.1_0.2".to_string(), "0.3_0.4".to_string()]).unwrap();
        assert!(words.len() <= 4);
        assert!(words.iter().all(|w| w.starts_with("LH_") || w.starts_with("RH_")));
    }

    #[test]
    fn teacher_forcing_feeds_gold_prefix() {
        let m = tiny();
        let s = m.init_params(1);
        let pair = EncodedPair { src: vec![3, 4, EOS], tgt: vec![4, 3, EOS] };
        assert_eq!(m.decoder_inputs(&s.values, &pair, true).unwrap(), vec![SOS, 4, 3]);
    }
}
