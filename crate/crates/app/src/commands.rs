//! Subcommand implementations. Each writes its output files and returns a
//! one-paragraph summary for standard output.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use betaflow::dataset::{DatasetManifest, OrderedHoldsExample};
use betaflow::dbscan::Label;
use betaflow::landmarks::{load_landmark_stream, StreamFormat, POSE_EDGES};
use betaflow::models::seq2seq::EncodedPair;
use betaflow::models::{
    evaluate, train_order_model, ArtConfig, ArtModel, EvalReport, OrderModel, Seq2SeqConfig, Seq2SeqModel,
    SimpleConfig, SimpleModel, TrainConfig, TrainOutcome,
};
use betaflow::motion::{
    cluster_holds, detect_all_static_points, extract_move_sequence, extremity_tracks, Hold, StaticPoint,
};
use betaflow::skeleton::{interpolate_extremities, start_pose_of, synthesize_clip, write_frames, AnimationClip, BodyRegressor};
use betaflow::{HoldsSequence, MoveSequence};

use crate::cli::*;
use crate::inference::{LoadedModel, ModelKind};

/// Body regressor fitted on the bundled synthetic climbs.
pub const BUNDLED_REGRESSOR: &str = include_str!("../../../fixtures/regressor.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticReport {
    pub dist_threshold: f64,
    pub min_static_frames: usize,
    pub frames: usize,
    pub static_points: Vec<StaticPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub eps: f64,
    pub min_pts: usize,
    pub holds: Vec<Hold>,
    /// Hold id per static point; `null` for noise.
    pub assignment: Vec<Option<usize>>,
    pub move_sequence: MoveSequence,
}

pub fn run(cmd: Command) -> Result<String> {
    match cmd {
        Command::Detect(a) => detect(&a),
        Command::Cluster(a) => cluster(&a),
        Command::Animate(a) => animate(&a),
        Command::Render(a) => render(&a),
        Command::Dataset(a) => dataset(&a),
        Command::Train(a) => train(&a),
        Command::Predict(a) => predict(&a),
        Command::Eval(a) => eval(&a),
        Command::Serve(a) => crate::service::run_blocking(&a),
        Command::Fixtures(a) => {
            let files = crate::fixtures::write_pack(&a.out, a.seed)?;
            Ok(format!("wrote {} fixture files to {}", files.len(), a.out.display()))
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_regressor(path: Option<&Path>) -> Result<BodyRegressor> {
    let reg: BodyRegressor = match path {
        Some(p) => read_json(p)?,
        None => serde_json::from_str(BUNDLED_REGRESSOR).context("bundled regressor")?,
    };
    reg.validate()?;
    Ok(reg)
}

/// Move sequence from `x,y,limb` CSV, sequence JSON or `cluster` output.
pub fn read_move_sequence(path: &Path) -> Result<MoveSequence> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let seq = if is_csv {
        let f = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
        MoveSequence::read_csv(f)?
    } else {
        let value: serde_json::Value = read_json(path)?;
        let inner = value.get("move_sequence").cloned().unwrap_or(value);
        serde_json::from_value(inner).with_context(|| format!("{} is not a move sequence", path.display()))?
    };
    seq.validate()?;
    Ok(seq)
}

fn detect(a: &DetectArgs) -> Result<String> {
    let f = fs::File::open(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let frames = load_landmark_stream(std::io::BufReader::new(f), StreamFormat::from_path(&a.input))?;
    let tracks = extremity_tracks(&frames)?;
    let static_points = detect_all_static_points(&tracks, a.threshold, a.min_frames)?;
    let report = StaticReport {
        dist_threshold: a.threshold,
        min_static_frames: a.min_frames,
        frames: frames.len(),
        static_points,
    };
    write_json(&a.out, &report)?;
    Ok(format!("{} frames, {} static points -> {}", report.frames, report.static_points.len(), a.out.display()))
}

fn cluster(a: &ClusterArgs) -> Result<String> {
    let report: StaticReport = read_json(&a.input)?;
    let clustering = cluster_holds(&report.static_points, a.eps, a.min_pts)?;
    let moves = extract_move_sequence(&report.static_points, &clustering.holds, &clustering.assignment)?;
    let noise = clustering.assignment.iter().filter(|l| **l == Label::Noise).count();
    let out = ClusterReport {
        eps: a.eps,
        min_pts: a.min_pts,
        holds: clustering.holds,
        assignment: clustering.assignment.iter().map(|l| l.cluster()).collect(),
        move_sequence: moves,
    };
    write_json(&a.out, &out)?;
    if let Some(p) = &a.moves_csv {
        out.move_sequence.write_csv(fs::File::create(p).with_context(|| format!("writing {}", p.display()))?)?;
    }
    Ok(format!(
        "{} holds, {} moves, {} noise static points -> {}",
        out.holds.len(),
        out.move_sequence.len(),
        noise,
        a.out.display()
    ))
}

pub fn animate_sequence(seq: &MoveSequence, frames_per_move: usize, fps: f64, reg: &BodyRegressor) -> Result<AnimationClip> {
    let traj = interpolate_extremities(seq, start_pose_of(seq), frames_per_move)?;
    Ok(synthesize_clip(&traj, reg, fps)?)
}

fn animate(a: &AnimateArgs) -> Result<String> {
    let seq = read_move_sequence(&a.input)?;
    let reg = load_regressor(a.regressor.as_deref())?;
    let clip = animate_sequence(&seq, a.frames_per_move, a.fps, &reg)?;
    write_json(&a.out, &clip)?;
    Ok(format!("{} moves -> {} frames at {} fps -> {}", seq.len(), clip.frames_total(), clip.fps, a.out.display()))
}

fn render(a: &RenderArgs) -> Result<String> {
    let clip: AnimationClip = read_json(&a.input)?;
    let paths = write_frames(&clip, &a.out, a.width, a.height, &POSE_EDGES)?;
    Ok(format!("rendered {} frames ({}x{}) into {}", paths.len(), a.width, a.height, a.out.display()))
}

enum SequenceInput {
    Moves(Vec<MoveSequence>),
    Holds(Vec<HoldsSequence>),
}

fn read_sequences(path: &Path) -> Result<SequenceInput> {
    let value: serde_json::Value = read_json(path)?;
    let items = value.as_array().with_context(|| format!("{} must hold a JSON array of sequences", path.display()))?;
    if items.is_empty() {
        bail!("{} holds no sequences", path.display());
    }
    if items.iter().all(|v| v.get("moves").is_some()) {
        let seqs: Vec<MoveSequence> = serde_json::from_value(value.clone())?;
        for (i, s) in seqs.iter().enumerate() {
            s.validate().with_context(|| format!("sequence {i}"))?;
        }
        Ok(SequenceInput::Moves(seqs))
    } else if items.iter().all(|v| v.get("holds").is_some()) {
        let seqs: Vec<HoldsSequence> = serde_json::from_value(value.clone())?;
        for (i, s) in seqs.iter().enumerate() {
            s.validate().with_context(|| format!("sequence {i}"))?;
            if s.order.is_none() {
                bail!("sequence {i}: holds sequences need an `order` to build a dataset");
            }
        }
        Ok(SequenceInput::Holds(seqs))
    } else {
        bail!("{}: every entry must be a move sequence (`moves`) or a holds sequence (`holds`)", path.display())
    }
}

fn dataset(a: &DatasetArgs) -> Result<String> {
    let mut manifest = match read_sequences(&a.input)? {
        SequenceInput::Moves(seqs) => DatasetManifest::from_sequences(seqs, a.seed, a.n_perms),
        SequenceInput::Holds(holds) => DatasetManifest::new(holds, a.seed, a.n_perms),
    };
    manifest.max_len = a.max_len;
    manifest.pad_id = a.max_len;
    manifest.val_fraction = a.val_frac;
    if let Some((i, b)) = manifest.bases.iter().enumerate().find(|(_, b)| b.len() > a.max_len) {
        bail!("sequence {i} has {} distinct holds, more than --max-len {}", b.len(), a.max_len);
    }
    let (train, val) = manifest.build()?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    manifest.save(&a.out)?;
    Ok(format!(
        "{} bases -> {} train / {} val examples ({} permutations each) -> {}",
        manifest.bases.len(),
        train.len(),
        val.len(),
        a.n_perms,
        a.out.display()
    ))
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        batch_size: a.batch_size,
        eval_interval: a.eval_interval,
        seed: a.seed,
        ignore_pad: a.ignore_pad,
        teacher_forcing: a.teacher_forcing,
        checkpoint_dir: Some(a.out.clone()),
    }
}

pub fn art_config(max_holds: usize, s: &ModelShape, manifest: &DatasetManifest) -> ArtConfig {
    let d = ArtConfig::default();
    ArtConfig {
        max_holds,
        dim: s.dim.unwrap_or(d.dim),
        heads: s.heads.unwrap_or(d.heads),
        blocks: s.blocks.unwrap_or(d.blocks),
        ffn_hidden: s.ffn.unwrap_or(d.ffn_hidden),
        layer_norm: s.layer_norm,
        pad_strategy: manifest.pad_strategy,
        ..d
    }
}

pub fn simple_config(max_holds: usize, s: &ModelShape, manifest: &DatasetManifest) -> SimpleConfig {
    let d = SimpleConfig::default();
    SimpleConfig {
        max_holds,
        dim: s.dim.unwrap_or(d.dim),
        heads: s.heads.unwrap_or(d.heads),
        blocks: s.blocks.unwrap_or(d.blocks),
        ffn_hidden: s.ffn.unwrap_or(d.ffn_hidden),
        layer_norm: s.layer_norm,
        pad_strategy: manifest.pad_strategy,
    }
}

fn summarize(model: &str, out: &TrainOutcome, dir: &Path) -> String {
    let last = out.history.last().expect("at least one epoch");
    format!(
        "{model}: {} epochs, final train loss {:.4}, best epoch {} (loss {:.4}) -> {}",
        last.epoch,
        last.train_loss,
        out.best_epoch,
        out.best_loss,
        dir.display()
    )
}

fn train_order<M: OrderModel>(model: M, manifest: &DatasetManifest, cfg: &TrainConfig, dir: &Path) -> Result<String> {
    let (train, val) = manifest.build()?;
    let train = model.prepare_all(&train)?;
    let val = model.prepare_all(&val)?;
    let mut store = model.init_params(cfg.seed);
    let out = train_order_model(&model, &mut store, &train, &val, cfg)?;
    Ok(summarize(M::NAME, &out, dir))
}

pub fn seq2seq_corpus(model: &Seq2SeqModel, seqs: &[MoveSequence]) -> Result<Vec<EncodedPair>> {
    Ok(seqs.iter().map(|s| model.encode_moves(s)).collect::<betaflow::Result<_>>()?)
}

fn train(a: &TrainArgs) -> Result<String> {
    let manifest = DatasetManifest::load(&a.input).with_context(|| format!("loading manifest {}", a.input.display()))?;
    let cfg = train_config(a);
    match a.model {
        ModelKind::Art => train_order(ArtModel::new(art_config(manifest.max_len, &a.shape, &manifest))?, &manifest, &cfg, &a.out),
        ModelKind::Simple => {
            train_order(SimpleModel::new(simple_config(manifest.max_len, &a.shape, &manifest))?, &manifest, &cfg, &a.out)
        }
        ModelKind::Seq2seq => {
            let (train, val) = manifest.split_sequences()?;
            // vocabularies come from the training side only; unseen words map to UNK
            let (input, output) = betaflow::dataset::build_seq2seq_vocabs(&train, &[], 1)?;
            let d = Seq2SeqConfig::new(input, output);
            let model = Seq2SeqModel::new(Seq2SeqConfig {
                hidden: a.shape.hidden.unwrap_or(d.hidden),
                embed: a.shape.embed.unwrap_or(d.embed),
                ..d
            })?;
            let mut store = model.init_params(cfg.seed);
            let out = model.train(&mut store, &seq2seq_corpus(&model, &train)?, &seq2seq_corpus(&model, &val)?, &cfg)?;
            Ok(summarize("seq2seq", &out, &a.out))
        }
    }
}

fn untrained(kind: ModelKind, holds: &HoldsSequence, seed: u64) -> Result<LoadedModel> {
    let max = betaflow::dataset::DEFAULT_MAX_HOLDS.max(holds.len());
    Ok(match kind {
        ModelKind::Art => {
            let m = ArtModel::new(ArtConfig { max_holds: max, ..ArtConfig::default() })?;
            let s = m.init_params(seed);
            LoadedModel::Art(m, s)
        }
        ModelKind::Simple => {
            let m = SimpleModel::new(SimpleConfig { max_holds: max, ..SimpleConfig::default() })?;
            let s = m.init_params(seed);
            LoadedModel::Simple(m, s)
        }
        ModelKind::Seq2seq => bail!("the seq2seq model needs a trained checkpoint (its vocabulary comes from training)"),
    })
}

fn predict(a: &PredictArgs) -> Result<String> {
    let holds: HoldsSequence = read_json(&a.holds)?;
    holds.validate()?;
    let loaded = match &a.checkpoint {
        Some(p) => LoadedModel::load(p)?,
        None => {
            log::warn!("no --checkpoint given; predicting with an untrained {} model (seed {})", a.model.name(), a.seed);
            untrained(a.model, &holds, a.seed)?
        }
    };
    if loaded.kind() != a.model {
        bail!("checkpoint holds a `{}` model, not `{}`", loaded.kind().name(), a.model.name());
    }
    let value = match a.model {
        ModelKind::Seq2seq => {
            serde_json::json!({ "model": a.model.name(), "move_sentence": loaded.translate_holds(&holds.holds)?.join(" ") })
        }
        _ => serde_json::to_value(loaded.predict_order(&holds, a.exclude_used)?)?,
    };
    match &a.out {
        Some(p) => {
            write_json(p, &value)?;
            Ok(format!("{} prediction for {} holds -> {}", a.model.name(), holds.len(), p.display()))
        }
        None => Ok(serde_json::to_string(&value)?),
    }
}

#[derive(Debug, Serialize)]
struct OrderEval {
    model: &'static str,
    train: EvalReport,
    val: EvalReport,
}

fn eval_order<M: OrderModel>(model: &M, store: &betaflow::nn::ParamStore, manifest: &DatasetManifest, ignore_pad: bool) -> Result<OrderEval> {
    let (train, val) = manifest.build()?;
    let score = |set: &[OrderedHoldsExample]| -> Result<EvalReport> {
        Ok(evaluate(model, &store.values, &model.prepare_all(set)?, ignore_pad)?)
    };
    Ok(OrderEval { model: M::NAME, train: score(&train)?, val: score(&val)? })
}

fn eval(a: &EvalArgs) -> Result<String> {
    let manifest = DatasetManifest::load(&a.input).with_context(|| format!("loading manifest {}", a.input.display()))?;
    let loaded = LoadedModel::load(&a.checkpoint)?;
    if loaded.kind() != a.model {
        bail!("checkpoint holds a `{}` model, not `{}`", loaded.kind().name(), a.model.name());
    }
    let (value, line) = match &loaded {
        LoadedModel::Art(m, s) => {
            let r = eval_order(m, s, &manifest, a.ignore_pad)?;
            let line = format!("art: val loss {:.4}, accuracy {:.3}, pad share {:.3}", r.val.loss, r.val.accuracy, r.val.pad_fraction);
            (serde_json::to_value(r)?, line)
        }
        LoadedModel::Simple(m, s) => {
            let r = eval_order(m, s, &manifest, a.ignore_pad)?;
            let line = format!("simple: val loss {:.4}, accuracy {:.3}", r.val.loss, r.val.accuracy);
            (serde_json::to_value(r)?, line)
        }
        LoadedModel::Seq2seq(m, s) => {
            let (train, val) = manifest.split_sequences()?;
            let train = seq2seq_corpus(m, &train)?;
            let val = seq2seq_corpus(m, &val)?;
            let exact = val
                .iter()
                .map(|p| Ok(m.translate_ids(&s.values, &p.src[..p.src.len() - 1])? == p.tgt[..p.tgt.len() - 1]))
                .collect::<betaflow::Result<Vec<bool>>>()?;
            let exact_share = exact.iter().filter(|&&e| e).count() as f64 / exact.len() as f64;
            let val_ppl = m.perplexity(&s.values, &val)?;
            let value = serde_json::json!({
                "model": "seq2seq",
                "train_ppl": m.perplexity(&s.values, &train)?,
                "val_ppl": val_ppl,
                "val_exact_match": exact_share,
            });
            let line = format!("seq2seq: val perplexity {val_ppl:.3}, exact translations {exact_share:.3}");
            (value, line)
        }
    };
    write_json(&a.out, &value)?;
    Ok(format!("{line} -> {}", a.out.display()))
}
