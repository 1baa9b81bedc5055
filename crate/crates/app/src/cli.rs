use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use betaflow::motion::{DEFAULT_DIST_THRESHOLD, DEFAULT_EPS, DEFAULT_MIN_PTS, DEFAULT_MIN_STATIC_FRAMES};

use crate::inference::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "betaflow", version, about = "Climbing beta extraction, skeleton animation and hold-order models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find static extremity intervals in a landmark stream.
    Detect(DetectArgs),
    /// Cluster static points into holds and derive the move sequence.
    Cluster(ClusterArgs),
    /// Synthesize a skeleton clip from a move sequence.
    Animate(AnimateArgs),
    /// Render a clip to PNG frames.
    Render(RenderArgs),
    /// Build a dataset manifest from ordered sequences.
    Dataset(DatasetArgs),
    /// Train a model on a dataset manifest.
    Train(TrainArgs),
    /// Predict a hold order (art, simple) or a move sentence (seq2seq).
    Predict(PredictArgs),
    /// Score a checkpoint on a dataset manifest.
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Regenerate the bundled synthetic fixture pack.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Landmark stream (.csv or .json).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum per-frame displacement of a resting extremity.
    #[arg(long, default_value_t = DEFAULT_DIST_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_STATIC_FRAMES)]
    pub min_frames: usize,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Output of `detect`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_PTS)]
    pub min_pts: usize,
    /// Also write the move sequence as `x,y,limb` CSV.
    #[arg(long)]
    pub moves_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnimateArgs {
    /// Move sequence (.csv, .json, or the output of `cluster`).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub frames_per_move: usize,
    #[arg(long, default_value_t = betaflow::skeleton::DEFAULT_FPS)]
    pub fps: f64,
    /// Body regressor JSON; defaults to the bundled one.
    #[arg(long)]
    pub regressor: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Clip JSON.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for `frame_NNNNN.png`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 360)]
    pub width: u32,
    #[arg(long, default_value_t = 640)]
    pub height: u32,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// JSON array of move sequences or ordered holds sequences.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Manifest path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub n_perms: usize,
    #[arg(long, default_value_t = 0.2)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest number of holds per example; also the pad id.
    #[arg(long, default_value_t = betaflow::dataset::DEFAULT_MAX_HOLDS)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct ModelShape {
    /// Model width (art, simple).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub ffn: Option<usize>,
    #[arg(long)]
    pub layer_norm: bool,
    /// Recurrent state size (seq2seq).
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Word embedding size (seq2seq).
    #[arg(long)]
    pub embed: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Dataset manifest.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Checkpoint directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub eval_interval: usize,
    /// Leave pad targets out of the loss.
    #[arg(long)]
    pub ignore_pad: bool,
    #[arg(long, default_value_t = 0.5)]
    pub teacher_forcing: f64,
    #[command(flatten)]
    pub shape: ModelShape,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Holds sequence JSON (`{"holds": [[x, y], ...], "order": [...]}`).
    #[arg(long)]
    pub holds: PathBuf,
    /// Trained checkpoint. Without one an untrained model seeded by
    /// `--seed` is used.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Never predict the same hold twice (art).
    #[arg(long)]
    pub exclude_used: bool,
    /// Output JSON; printed to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset manifest.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub ignore_pad: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Project store directory.
    #[arg(long, default_value = "betaflow-store")]
    pub store: PathBuf,
    /// Directory of checkpoints to serve (one per model kind).
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    #[arg(long)]
    pub regressor: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long, default_value = "fixtures")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}
