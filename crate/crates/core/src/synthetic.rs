//! Deterministic fixture generators: Moonboard-style problems with authored
//! betas, and landmark streams of a simulated climber executing them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::landmarks::{Landmark, LandmarkFrame, BODY_LANDMARKS, EXTREMITY_GROUPS, NUM_LANDMARKS};
use crate::sequence::{Limb, MoveSequence, Point};

pub const BOARD_COLS: usize = 11;
pub const BOARD_ROWS: usize = 18;
/// Upper bound on the distinct holds of a generated problem.
pub const MAX_PROBLEM_HOLDS: usize = 17;

/// Centre of grid cell `(col, row)`; row 0 is the bottom of the board.
pub fn board_point(col: usize, row: usize) -> Point {
    Point::new((col as f64 + 0.5) / BOARD_COLS as f64, 1.0 - (row as f64 + 0.5) / BOARD_ROWS as f64)
}

struct ProblemBuilder {
    moves: Vec<((usize, usize), Limb)>,
    pos: [(usize, usize); 4],
    used: Vec<(usize, usize)>,
}

impl ProblemBuilder {
    fn go(&mut self, limb: Limb, cell: (usize, usize)) {
        self.moves.push((cell, limb));
        self.pos[limb.index()] = cell;
        if !self.used.contains(&cell) {
            self.used.push(cell);
        }
    }

    fn occupied(&self, cell: (usize, usize)) -> bool {
        self.pos.contains(&cell)
    }
}

/// One problem: the four start moves (LH, RH, LF, RF), hand moves
/// alternating up the board with occasional foot moves, and a matched
/// finish on a top-row hold.
pub fn moonboard_problem<R: Rng>(rng: &mut R) -> MoveSequence {
    let lf = (rng.gen_range(2..=5), rng.gen_range(0..=1));
    let rf = (lf.0 + rng.gen_range(2..=3), rng.gen_range(0..=1));
    let lh_row = rng.gen_range(4..=6);
    let lh = (rng.gen_range(2..=6), lh_row);
    let rh = ((lh.0 + rng.gen_range(1..=3)).min(BOARD_COLS - 1), (lh_row + rng.gen_range(0..=1)).min(BOARD_ROWS - 1));
    let mut b = ProblemBuilder { moves: Vec::new(), pos: [lh, rh, lf, rf], used: Vec::new() };
    b.go(Limb::LeftHand, lh);
    b.go(Limb::RightHand, rh);
    b.go(Limb::LeftFoot, lf);
    b.go(Limb::RightFoot, rf);

    let budget = rng.gen_range(6..=MAX_PROBLEM_HOLDS - 1);
    loop {
        let (l, r) = (b.pos[0], b.pos[1]);
        let top = l.1.max(r.1);
        if top >= BOARD_ROWS - 3 || b.used.len() >= budget {
            break;
        }
        let hand = if l.1 < r.1 || (l.1 == r.1 && rng.gen_bool(0.5)) { Limb::LeftHand } else { Limb::RightHand };
        let cur = b.pos[hand.index()];
        let target = (0..20).find_map(|_| {
            let row = (top + rng.gen_range(1..=3)).min(BOARD_ROWS - 2);
            let col = (cur.0 as i64 + rng.gen_range(-2..=2)).clamp(0, BOARD_COLS as i64 - 1) as usize;
            let cell = (col, row);
            (!b.occupied(cell)).then_some(cell)
        });
        let Some(target) = target else { break };
        b.go(hand, target);

        if rng.gen_bool(0.5) && b.used.len() < budget {
            let foot = if rng.gen_bool(0.5) { Limb::LeftFoot } else { Limb::RightFoot };
            let fcur = b.pos[foot.index()];
            let low_hand = b.pos[0].1.min(b.pos[1].1);
            let ceiling = low_hand.saturating_sub(3);
            if ceiling > fcur.1 {
                let reuse: Vec<_> =
                    b.used.iter().copied().filter(|c| c.1 > fcur.1 && c.1 <= ceiling && !b.occupied(*c)).collect();
                let cell = if !reuse.is_empty() && rng.gen_bool(0.5) {
                    *reuse.choose(rng).expect("nonempty")
                } else {
                    let row = rng.gen_range(fcur.1 + 1..=ceiling);
                    let col = (fcur.0 as i64 + rng.gen_range(-1..=1)).clamp(0, BOARD_COLS as i64 - 1) as usize;
                    (col, row)
                };
                if !b.occupied(cell) {
                    b.go(foot, cell);
                }
            }
        }
    }

    let lead = if b.pos[0].1 >= b.pos[1].1 { Limb::LeftHand } else { Limb::RightHand };
    let other = if lead == Limb::LeftHand { Limb::RightHand } else { Limb::LeftHand };
    let col = (b.pos[lead.index()].0 as i64 + rng.gen_range(-1..=1)).clamp(0, BOARD_COLS as i64 - 1) as usize;
    let finish = (col, BOARD_ROWS - 1);
    b.go(lead, finish);
    b.go(other, finish);

    MoveSequence::from_moves(b.moves.into_iter().map(|((c, r), l)| (board_point(c, r), l)))
}

pub fn moonboard_problems(n: usize, seed: u64) -> Vec<MoveSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| moonboard_problem(&mut rng)).collect()
}

/// Body landmarks as fixed affine combinations of the extremity positions:
/// `body_k = Σ_e a_ke · ext_e + c_k` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel {
    /// Per body landmark and axis, weights over the four extremities.
    pub weights: Vec<[[f64; 4]; 2]>,
    pub offsets: Vec<[f64; 2]>,
}

impl BodyModel {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(BODY_LANDMARKS.len());
        let mut offsets = Vec::with_capacity(BODY_LANDMARKS.len());
        for &idx in &BODY_LANDMARKS {
            // upper body leans on the hands, hips and knees on the feet
            let hand_share = if idx <= 14 { 0.75 } else { 0.3 };
            let mut axis = || {
                let a: f64 = rng.gen_range(0.2..0.8);
                let b: f64 = rng.gen_range(0.2..0.8);
                [hand_share * a, hand_share * (1.0 - a), (1.0 - hand_share) * b, (1.0 - hand_share) * (1.0 - b)]
            };
            weights.push([axis(), axis()]);
            offsets.push([rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03)]);
        }
        Self { weights, offsets }
    }

    pub fn body(&self, ext: &[Point; 4]) -> Vec<Point> {
        self.weights
            .iter()
            .zip(&self.offsets)
            .map(|(w, c)| {
                let x = (0..4).map(|e| w[0][e] * ext[e].x).sum::<f64>() + c[0];
                let y = (0..4).map(|e| w[1][e] * ext[e].y).sum::<f64>() + c[1];
                Point::new(x, y)
            })
            .collect()
    }
}

/// Landmark frame with extremity groups spread around their centroids by
/// fixed zero-mean offsets and the given body positions.
pub fn compose_frame(frame_index: u64, ext: &[Point; 4], body: &[Point], visibility: f64) -> LandmarkFrame {
    let mut landmarks = [Landmark { x: 0.0, y: 0.0, visibility }; NUM_LANDMARKS];
    for (g, group) in EXTREMITY_GROUPS.iter().enumerate() {
        let k = group.len() as f64;
        for (j, &idx) in group.iter().enumerate() {
            let angle = std::f64::consts::TAU * j as f64 / k;
            landmarks[idx].x = ext[g].x + 0.006 * angle.cos();
            landmarks[idx].y = ext[g].y + 0.006 * angle.sin();
        }
    }
    for (p, &idx) in body.iter().zip(&BODY_LANDMARKS) {
        landmarks[idx].x = p.x;
        landmarks[idx].y = p.y;
    }
    LandmarkFrame { frame_index, landmarks }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClimberConfig {
    /// Frames every limb rests before the next move starts.
    pub dwell_frames: usize,
    /// Distance covered per travel frame.
    pub travel_speed: f64,
    /// Standard deviation of the per-frame jitter on extremity positions.
    pub jitter: f64,
    /// Standard deviation of the noise on body landmarks.
    pub body_noise: f64,
}

impl Default for ClimberConfig {
    fn default() -> Self {
        Self { dwell_frames: 20, travel_speed: 0.015, jitter: 0.0003, body_noise: 0.002 }
    }
}

/// Landmark stream of a climber executing `seq`: all four extremities start
/// on their first holds, then each later move travels in a straight line
/// and rests for `dwell_frames`.
pub fn climber_stream(seq: &MoveSequence, body: &BodyModel, cfg: &ClimberConfig, seed: u64) -> Result<Vec<LandmarkFrame>> {
    seq.validate()?;
    let first: Vec<Limb> = seq.moves.iter().take(4).map(|m| m.limb).collect();
    if first != Limb::ALL {
        return Err(Error::invalid("climber streams need the four start moves LH, RH, LF, RF first"));
    }
    if !(cfg.travel_speed > 0.0) || cfg.dwell_frames == 0 {
        return Err(Error::invalid("travel_speed and dwell_frames must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, cfg.jitter).map_err(|e| Error::invalid(e.to_string()))?;
    let body_noise = Normal::new(0.0, cfg.body_noise).map_err(|e| Error::invalid(e.to_string()))?;

    let mut pose: [Point; 4] = std::array::from_fn(|i| seq.moves[i].point());
    let mut clean: Vec<[Point; 4]> = vec![pose; cfg.dwell_frames];
    for m in &seq.moves[4..] {
        let i = m.limb.index();
        let (src, dst) = (pose[i], m.point());
        let steps = (src.distance(&dst) / cfg.travel_speed).ceil().max(1.0) as usize;
        for t in 1..=steps {
            let f = t as f64 / steps as f64;
            pose[i] = if t == steps { dst } else { Point::new(src.x + (dst.x - src.x) * f, src.y + (dst.y - src.y) * f) };
            clean.push(pose);
        }
        clean.extend(std::iter::repeat_n(pose, cfg.dwell_frames - 1));
    }

    Ok(clean
        .iter()
        .enumerate()
        .map(|(fi, ext)| {
            let noisy: [Point; 4] =
                ext.map(|p| Point::new(p.x + jitter.sample(&mut rng), p.y + jitter.sample(&mut rng)));
            let body_pts: Vec<Point> = body
                .body(ext)
                .into_iter()
                .map(|p| Point::new(p.x + body_noise.sample(&mut rng), p.y + body_noise.sample(&mut rng)))
                .collect();
            let visibility = rng.gen_range(0.6..1.0);
            compose_frame(fi as u64, &noisy, &body_pts, visibility)
        })
        .collect())
}

/// Frames with uniformly random extremities and body landmarks from `body`
/// plus Gaussian noise of standard deviation `noise`.
pub fn random_pose_frames(n: usize, body: &BodyModel, noise: f64, seed: u64) -> Vec<LandmarkFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|fi| {
            let ext: [Point; 4] = std::array::from_fn(|_| Point::new(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)));
            let body_pts: Vec<Point> = body
                .body(&ext)
                .into_iter()
                .map(|p| {
                    if noise > 0.0 {
                        let d = Normal::new(0.0, noise).expect("positive std");
                        Point::new(p.x + d.sample(&mut rng), p.y + d.sample(&mut rng))
                    } else {
                        p
                    }
                })
                .collect();
            compose_frame(fi as u64, &ext, &body_pts, 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problems_are_valid_and_bounded() {
        for (i, p) in moonboard_problems(50, 7).iter().enumerate() {
            p.validate().unwrap();
            let limbs: Vec<_> = p.moves.iter().take(4).map(|m| m.limb).collect();
            assert_eq!(limbs, Limb::ALL, "problem {i}");
            let n = p.to_holds_sequence().len();
            assert!((5..=MAX_PROBLEM_HOLDS).contains(&n), "problem {i} has {n} holds");
            let last = p.moves[p.len() - 1].point();
            assert_eq!(p.moves[p.len() - 2].point(), last);
            assert!((last.y - board_point(0, BOARD_ROWS - 1).y).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(moonboard_problems(5, 3), moonboard_problems(5, 3));
        let body = BodyModel::random(1);
        let p = &moonboard_problems(1, 3)[0];
        let cfg = ClimberConfig::default();
        assert_eq!(climber_stream(p, &body, &cfg, 2).unwrap(), climber_stream(p, &body, &cfg, 2).unwrap());
    }

    #[test]
    fn group_offsets_cancel() {
        let ext = [Point::new(0.3, 0.4), Point::new(0.6, 0.4), Point::new(0.3, 0.9), Point::new(0.6, 0.9)];
        let f = compose_frame(0, &ext, &BodyModel::random(0).body(&ext), 1.0);
        for l in Limb::ALL {
            assert!(f.extremity_centroid(l).distance(&ext[l.index()]) < 1e-12);
        }
    }
}
