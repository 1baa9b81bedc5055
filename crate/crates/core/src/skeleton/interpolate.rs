use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Limb, MoveSequence, Point};

/// Rest positions for extremities that never move: hands above the feet,
/// roughly where a climber stands at the foot of the wall.
pub const REST_POSE: [Point; 4] =
    [Point::new(0.4, 0.55), Point::new(0.6, 0.55), Point::new(0.45, 0.95), Point::new(0.55, 0.95)];

/// Positions of the four extremities (indexed by [`Limb::index`]) at every
/// animation frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremityTrajectory {
    pub frames: Vec<[Point; 4]>,
    /// Extremity in motion at each frame; `None` at frame 0.
    pub moving: Vec<Option<Limb>>,
    /// One entry per executed move: the limb, its target and the frame at
    /// which it arrives.
    pub arrivals: Vec<Arrival>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub limb: Limb,
    pub target: Point,
    pub frame_start: usize,
    pub frame_end: usize,
}

impl ExtremityTrajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn sorted_moves(seq: &MoveSequence) -> Vec<(Point, Limb)> {
    let mut moves: Vec<_> = seq.moves.iter().map(|m| (m.order_index, m.point(), m.limb)).collect();
    moves.sort_by_key(|m| m.0);
    moves.into_iter().map(|(_, p, l)| (p, l)).collect()
}

/// Each extremity starts on its own first hold; extremities without moves
/// stay at [`REST_POSE`].
pub fn start_pose_of(seq: &MoveSequence) -> [Point; 4] {
    let mut pose = REST_POSE;
    let mut seen = [false; 4];
    for (p, limb) in sorted_moves(seq) {
        if !seen[limb.index()] {
            seen[limb.index()] = true;
            pose[limb.index()] = p;
        }
    }
    pose
}

/// Frames per move, weighted by move length: `max(1, round(avg * d_k / d̄))`.
pub fn move_frame_counts(distances: &[f64], avg_frames_per_move: usize) -> Vec<usize> {
    let mean = distances.iter().sum::<f64>() / distances.len().max(1) as f64;
    let avg = avg_frames_per_move as f64;
    distances
        .iter()
        .map(|&d| if mean > 0.0 { ((avg * d / mean).round() as usize).max(1) } else { avg_frames_per_move })
        .collect()
}

fn lerp_clamped(a: f64, b: f64, t: f64) -> f64 {
    let v = a + (b - a) * t;
    v.clamp(a.min(b), a.max(b))
}

/// Linear interpolation of each move in `order_index` order, one extremity
/// at a time. The first move of an extremity whose target equals its start
/// position is skipped.
pub fn interpolate_extremities(
    seq: &MoveSequence,
    start_pose: [Point; 4],
    avg_frames_per_move: usize,
) -> Result<ExtremityTrajectory> {
    if avg_frames_per_move < 1 {
        return Err(Error::invalid("avg_frames_per_move must be >= 1"));
    }
    if seq.is_empty() {
        return Err(Error::invalid("cannot animate an empty move sequence"));
    }
    seq.validate()?;

    let mut current = start_pose;
    let mut moved = [false; 4];
    let mut plan = Vec::new();
    for (target, limb) in sorted_moves(seq) {
        let i = limb.index();
        let first = !moved[i];
        moved[i] = true;
        if first && current[i] == target {
            continue;
        }
        plan.push((limb, current[i], target));
        current[i] = target;
    }
    let distances: Vec<f64> = plan.iter().map(|(_, s, t)| s.distance(t)).collect();
    let counts = move_frame_counts(&distances, avg_frames_per_move);

    let mut pose = start_pose;
    let mut frames = vec![pose];
    let mut moving = vec![None];
    let mut arrivals = Vec::with_capacity(plan.len());
    for (&(limb, src, dst), &n) in plan.iter().zip(&counts) {
        let i = limb.index();
        let frame_start = frames.len() - 1;
        for t in 1..=n {
            pose[i] = if t == n {
                dst
            } else {
                let f = t as f64 / n as f64;
                Point::new(lerp_clamped(src.x, dst.x, f), lerp_clamped(src.y, dst.y, f))
            };
            frames.push(pose);
            moving.push(Some(limb));
        }
        arrivals.push(Arrival { limb, target: dst, frame_start, frame_end: frames.len() - 1 });
    }
    Ok(ExtremityTrajectory { frames, moving, arrivals })
}

/// Average frames per move giving roughly `frames_total` frames overall.
pub fn avg_frames_for_total(seq: &MoveSequence, frames_total: usize) -> usize {
    let n = seq.len().max(1);
    (frames_total.saturating_sub(1) as f64 / n as f64).round().max(1.0) as usize
}
