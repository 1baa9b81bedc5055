use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use betaflow::dataset::{build_seq2seq_vocabs, OrderedHoldsExample};
use betaflow::models::{
    evaluate, train_order_model, ArtConfig, ArtModel, GenerateOptions, OrderModel, Seq2SeqConfig, Seq2SeqModel,
    SimpleConfig, SimpleModel, TrainConfig,
};
use betaflow::synthetic::moonboard_problems;
use betaflow::Point;

fn examples(n: usize, seed: u64) -> Vec<OrderedHoldsExample> {
    moonboard_problems(n, seed)
        .iter()
        .enumerate()
        .map(|(i, s)| OrderedHoldsExample::from_holds(i, &s.to_holds_sequence()).unwrap())
        .collect()
}

#[test]
fn art_logits_ignore_future_positions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..100 {
        let heads = rng.gen_range(1..=4);
        let cfg = ArtConfig {
            max_holds: rng.gen_range(2..=6),
            dim: 4 * heads * rng.gen_range(1..=2),
            heads,
            blocks: rng.gen_range(1..=3),
            ffn_hidden: rng.gen_range(4..=16),
            layer_norm: rng.gen_bool(0.5),
            ..ArtConfig::default()
        };
        let model = ArtModel::new(cfg.clone()).unwrap();
        let store = model.init_params(trial);
        let len = cfg.seq_len();
        let mut tokens: Vec<usize> = (0..len).map(|_| rng.gen_range(0..cfg.vocab())).collect();
        let mut coords: Vec<Point> = (0..len).map(|_| Point::new(rng.gen(), rng.gen())).collect();
        let before = model.forward(&store.values, &tokens, &coords).unwrap();

        let i = rng.gen_range(0..len);
        for j in i + 1..len {
            tokens[j] = rng.gen_range(0..cfg.vocab());
            coords[j] = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        }
        let after = model.forward(&store.values, &tokens, &coords).unwrap();
        for r in 0..=i {
            let same = before.row(r).iter().zip(after.row(r)).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "trial {trial}: row {r} changed after perturbing positions > {i} ({cfg:?})");
        }
    }
}

#[test]
fn simple_model_memorizes_five_examples() {
    let data = examples(5, 31);
    let model = SimpleModel::new(SimpleConfig::default()).unwrap();
    let pairs = model.prepare_all(&data).unwrap();
    let mut store = model.init_params(1);
    let cfg = TrainConfig { epochs: 300, batch_size: 1, eval_interval: 50, ..TrainConfig::default() };
    let out = train_order_model(&model, &mut store, &pairs, &[], &cfg).unwrap();
    let report = evaluate(&model, &out.latest.values, &pairs, false).unwrap();
    assert!(report.accuracy >= 0.99, "training token accuracy {}", report.accuracy);
}

#[test]
fn art_model_reproduces_a_memorized_ordering() {
    let ex = examples(1, 41).remove(0);
    let model = ArtModel::new(ArtConfig::default()).unwrap();
    let pairs = model.prepare_all(std::slice::from_ref(&ex)).unwrap();
    let mut store = model.init_params(2);
    let cfg = TrainConfig { epochs: 200, batch_size: 1, eval_interval: 50, ..TrainConfig::default() };
    let out = train_order_model(&model, &mut store, &pairs, &[], &cfg).unwrap();
    let predicted = model.generate(&out.latest.values, &ex.original, GenerateOptions::default()).unwrap();
    assert_eq!(predicted, ex.order);
}

#[test]
fn seq2seq_memorizes_five_pairs() {
    let seqs = moonboard_problems(5, 51);
    let (input, output) = build_seq2seq_vocabs(&seqs, &[], 1).unwrap();
    let model = Seq2SeqModel::new(Seq2SeqConfig { hidden: 64, embed: 32, ..Seq2SeqConfig::new(input, output) }).unwrap();
    let pairs: Vec<_> = seqs.iter().map(|s| model.encode_moves(s).unwrap()).collect();
    let mut store = model.init_params(3);
    let cfg = TrainConfig { epochs: 200, batch_size: 1, lr: 3e-3, eval_interval: 20, ..TrainConfig::default() };
    let out = model.train(&mut store, &pairs, &[], &cfg).unwrap();
    let last = out.history.last().unwrap().train_loss;
    assert!(last < 0.1, "final training loss {last}");
    for (pair, seq) in pairs.iter().zip(&seqs) {
        let src = &pair.src[..pair.src.len() - 1];
        let got = model.translate_ids(&out.latest.values, src).unwrap();
        assert_eq!(got, pair.tgt[..pair.tgt.len() - 1], "translation of {seq:?}");
    }
}

#[test]
fn art_model_can_collapse_onto_the_pad_token() {
    use betaflow::dataset::DatasetManifest;

    let bases: Vec<_> = moonboard_problems(20, 7).iter().map(|s| s.to_holds_sequence()).collect();
    let (train, val) = DatasetManifest::new(bases, 7, 50).build().unwrap();
    let model = ArtModel::new(ArtConfig::default()).unwrap();
    let train = model.prepare_all(&train).unwrap();
    let val = model.prepare_all(&val).unwrap();
    let mut store = model.init_params(0);
    let cfg = TrainConfig { epochs: 1, lr: 3e-5, ..TrainConfig::default() };
    let out = train_order_model(&model, &mut store, &train, &val, &cfg).unwrap();
    let report = evaluate(&model, &out.latest.values, &val, false).unwrap();
    assert!(report.pad_fraction > 0.8, "pad share of predictions {}", report.pad_fraction);
}
