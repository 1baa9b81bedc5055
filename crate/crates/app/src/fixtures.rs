//! Synthetic fixture pack: problems, landmark streams, a fitted regressor,
//! a dataset manifest and small inference-only checkpoints.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use betaflow::dataset::{build_seq2seq_vocabs, DatasetManifest};
use betaflow::landmarks::{write_landmark_csv, write_landmark_json};
use betaflow::models::{
    train_order_model, ArtConfig, ArtModel, OrderModel, Seq2SeqConfig, Seq2SeqModel, SimpleConfig, SimpleModel,
    TrainConfig,
};
use betaflow::nn::Checkpoint;
use betaflow::skeleton::BodyRegressor;
use betaflow::synthetic::{climber_stream, moonboard_problems, BodyModel, ClimberConfig};

use crate::commands::{seq2seq_corpus, write_json};

pub const NUM_PROBLEMS: usize = 20;
pub const NUM_PERMUTATIONS: usize = 50;

fn small_art() -> ArtConfig {
    ArtConfig { dim: 16, heads: 2, blocks: 1, ffn_hidden: 32, ..ArtConfig::default() }
}

fn small_simple() -> SimpleConfig {
    SimpleConfig { dim: 16, heads: 2, blocks: 1, ffn_hidden: 32, ..SimpleConfig::default() }
}

fn short_training(seed: u64) -> TrainConfig {
    TrainConfig { epochs: 3, lr: 3e-3, batch_size: 16, seed, ..TrainConfig::default() }
}

fn save_checkpoint(path: &Path, ck: Checkpoint) -> Result<()> {
    ck.without_optimizer_state().save(path).with_context(|| format!("writing {}", path.display()))
}

fn order_checkpoint<M: OrderModel>(model: M, manifest: &DatasetManifest, seed: u64, path: &Path) -> Result<()> {
    let (train, val) = manifest.build()?;
    let (train, val) = (model.prepare_all(&train)?, model.prepare_all(&val)?);
    let cfg = short_training(seed);
    let mut store = model.init_params(seed);
    let out = train_order_model(&model, &mut store, &train, &val, &cfg)?;
    save_checkpoint(path, model.checkpoint(&out.best, Some(&cfg))?)
}

/// Writes the pack under `dir` and returns the files in write order.
/// Output is a pure function of `seed`.
pub fn write_pack(dir: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join("streams"))?;
    fs::create_dir_all(dir.join("checkpoints"))?;
    let mut files = Vec::new();
    let mut record = |p: PathBuf| -> PathBuf {
        files.push(p.clone());
        p
    };

    let problems = moonboard_problems(NUM_PROBLEMS, seed);
    write_json(&record(dir.join("problems.json")), &problems)?;
    problems[0].write_csv(fs::File::create(record(dir.join("problem_00.csv")))?)?;
    write_json(&record(dir.join("holds_00.json")), &problems[0].to_holds_sequence())?;

    let body = BodyModel::random(seed);
    let streams = problems
        .iter()
        .enumerate()
        .map(|(i, p)| climber_stream(p, &body, &ClimberConfig::default(), seed + i as u64))
        .collect::<betaflow::Result<Vec<_>>>()?;
    write_landmark_csv(&streams[0], fs::File::create(record(dir.join("streams/climb_00.csv")))?)?;
    write_landmark_json(&streams[1], fs::File::create(record(dir.join("streams/climb_01.json")))?)?;

    let reg = BodyRegressor::fit(&streams)?;
    write_json(&record(dir.join("regressor.json")), &reg)?;

    let manifest = DatasetManifest::from_sequences(problems, seed, NUM_PERMUTATIONS);
    manifest.save(&record(dir.join("manifest.json")))?;

    order_checkpoint(ArtModel::new(small_art())?, &manifest, seed, &record(dir.join("checkpoints/art.json")))?;
    order_checkpoint(SimpleModel::new(small_simple())?, &manifest, seed, &record(dir.join("checkpoints/simple.json")))?;

    let (train, val) = manifest.split_sequences()?;
    let (input, output) = build_seq2seq_vocabs(&train, &[], 1)?;
    let model = Seq2SeqModel::new(Seq2SeqConfig { hidden: 16, embed: 16, ..Seq2SeqConfig::new(input, output) })?;
    let cfg = TrainConfig { epochs: 5, lr: 1e-2, batch_size: 4, seed, ..TrainConfig::default() };
    let mut store = model.init_params(seed);
    let out = model.train(&mut store, &seq2seq_corpus(&model, &train)?, &seq2seq_corpus(&model, &val)?, &cfg)?;
    save_checkpoint(&record(dir.join("checkpoints/seq2seq.json")), model.checkpoint(&out.best, Some(&cfg))?)?;

    Ok(files)
}
