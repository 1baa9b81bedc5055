use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmarks::{LandmarkFrame, BODY_LANDMARKS};
use crate::sequence::{Limb, Point};

/// Extremity coordinates plus the bias column.
pub const NUM_FEATURES: usize = 9;
pub const NUM_OUTPUTS: usize = 2 * BODY_LANDMARKS.len();
/// Regressed coordinates are clamped to this range.
pub const OUTPUT_RANGE: (f64, f64) = (-0.5, 1.5);
/// Every `HOLDOUT_EVERY`-th frame is held out for scoring.
pub const HOLDOUT_EVERY: usize = 5;

/// Linear map from the four extremity positions to the body landmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyRegressor {
    /// Row-major `[NUM_FEATURES][NUM_OUTPUTS]`; the last row is the bias.
    pub weights: Vec<f64>,
    /// Coefficient of determination per output on the held-out frames.
    pub r2: Vec<f64>,
    pub frames_train: usize,
    pub frames_holdout: usize,
    /// Root-mean-square residual on the training frames.
    pub train_rmse: f64,
}

pub fn features(extremities: &[Point; 4]) -> [f64; NUM_FEATURES] {
    let mut f = [1.0; NUM_FEATURES];
    for (i, p) in extremities.iter().enumerate() {
        f[2 * i] = p.x;
        f[2 * i + 1] = p.y;
    }
    f
}

pub fn extremities_of(frame: &LandmarkFrame) -> [Point; 4] {
    Limb::ALL.map(|l| frame.extremity_centroid(l))
}

pub fn body_targets(frame: &LandmarkFrame) -> [f64; NUM_OUTPUTS] {
    let mut y = [0.0; NUM_OUTPUTS];
    for (k, &idx) in BODY_LANDMARKS.iter().enumerate() {
        y[2 * k] = frame.landmarks[idx].x;
        y[2 * k + 1] = frame.landmarks[idx].y;
    }
    y
}

/// Least-squares solve of `x w = y` through a thin QR factorization.
pub fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cols = x.ncols();
    if x.nrows() < cols {
        return Err(Error::RankDeficient { rank: x.nrows(), columns: cols });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rank = r.diagonal().iter().filter(|v| v.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE)).count();
    if rank < cols {
        return Err(Error::RankDeficient { rank, columns: cols });
    }
    let rhs = qr.q().transpose() * y;
    r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient { rank, columns: cols })
}

/// `1 - SS_res / SS_tot`. A constant target scores 1 when predicted exactly
/// and 0 otherwise.
pub fn r_squared(truth: &[f64], pred: &[f64]) -> f64 {
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    if ss_tot <= f64::EPSILON * truth.len() as f64 * mean.abs().max(1.0) {
        return if ss_res <= 1e-20 * truth.len() as f64 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

impl BodyRegressor {
    /// Ordinary least squares on every frame of every stream, holding out
    /// frames whose running index is `4 mod 5` for the R² scores.
    pub fn fit(streams: &[Vec<LandmarkFrame>]) -> Result<Self> {
        let frames: Vec<&LandmarkFrame> = streams.iter().flatten().collect();
        if frames.len() <= NUM_FEATURES {
            return Err(Error::invalid(format!(
                "need more than {NUM_FEATURES} frames to fit the body regressor, got {}",
                frames.len()
            )));
        }
        let (holdout, train): (Vec<_>, Vec<_>) =
            frames.iter().enumerate().partition(|(i, _)| i % HOLDOUT_EVERY == HOLDOUT_EVERY - 1);
        let design = |set: &[(usize, &&LandmarkFrame)]| {
            let x = DMatrix::from_fn(set.len(), NUM_FEATURES, |r, c| features(&extremities_of(set[r].1))[c]);
            let y = DMatrix::from_fn(set.len(), NUM_OUTPUTS, |r, c| body_targets(set[r].1)[c]);
            (x, y)
        };
        let (x, y) = design(&train);
        let w = least_squares(&x, &y)?;
        let resid = &x * &w - &y;
        let train_rmse = (resid.norm_squared() / resid.len() as f64).sqrt();

        let weights = (0..NUM_FEATURES).flat_map(|r| (0..NUM_OUTPUTS).map(move |c| (r, c))).map(|(r, c)| w[(r, c)]).collect();
        let mut reg = BodyRegressor { weights, r2: Vec::new(), frames_train: train.len(), frames_holdout: holdout.len(), train_rmse };
        if !holdout.is_empty() {
            let (hx, hy) = design(&holdout);
            let pred = &hx * &w;
            reg.r2 = (0..NUM_OUTPUTS)
                .map(|c| {
                    let t: Vec<f64> = hy.column(c).iter().copied().collect();
                    let p: Vec<f64> = pred.column(c).iter().copied().collect();
                    r_squared(&t, &p)
                })
                .collect();
        }
        Ok(reg)
    }

    /// Constant map sending every body landmark to `p`.
    pub fn constant(p: Point) -> Self {
        let mut weights = vec![0.0; NUM_FEATURES * NUM_OUTPUTS];
        for k in 0..BODY_LANDMARKS.len() {
            weights[(NUM_FEATURES - 1) * NUM_OUTPUTS + 2 * k] = p.x;
            weights[(NUM_FEATURES - 1) * NUM_OUTPUTS + 2 * k + 1] = p.y;
        }
        Self { weights, r2: vec![1.0; NUM_OUTPUTS], frames_train: 0, frames_holdout: 0, train_rmse: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != NUM_FEATURES * NUM_OUTPUTS {
            return Err(Error::ShapeMismatch {
                op: "body regressor",
                left: vec![self.weights.len()],
                right: vec![NUM_FEATURES * NUM_OUTPUTS],
            });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("body regressor weights".into()));
        }
        Ok(())
    }

    /// Unclamped outputs in [`BODY_LANDMARKS`] order.
    pub fn predict_raw(&self, extremities: &[Point; 4]) -> [f64; NUM_OUTPUTS] {
        let f = features(extremities);
        let mut out = [0.0; NUM_OUTPUTS];
        for (r, fr) in f.iter().enumerate() {
            let row = &self.weights[r * NUM_OUTPUTS..(r + 1) * NUM_OUTPUTS];
            for (o, w) in out.iter_mut().zip(row) {
                *o += fr * w;
            }
        }
        out
    }

    /// Body landmark positions, clamped to [`OUTPUT_RANGE`]. The flag reports
    /// whether clamping happened.
    pub fn predict(&self, extremities: &[Point; 4]) -> ([Point; BODY_LANDMARKS.len()], bool) {
        let raw = self.predict_raw(extremities);
        let (lo, hi) = OUTPUT_RANGE;
        let mut clamped = false;
        let pts = std::array::from_fn(|k| {
            let (x, y) = (raw[2 * k], raw[2 * k + 1]);
            let (cx, cy) = (x.clamp(lo, hi), y.clamp(lo, hi));
            clamped |= cx != x || cy != y;
            Point::new(cx, cy)
        });
        (pts, clamped)
    }

    pub fn min_r2(&self) -> Option<f64> {
        self.r2.iter().copied().reduce(f64::min)
    }
}
