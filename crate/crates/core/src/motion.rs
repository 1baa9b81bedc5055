//! Static extremity detection, hold clustering and move-sequence extraction.

use serde::{Deserialize, Serialize};

use crate::dbscan::{dbscan, Label};
use crate::error::{Error, Result};
use crate::landmarks::LandmarkFrame;
use crate::sequence::{Limb, MoveSequence, Point};

pub const DEFAULT_DIST_THRESHOLD: f64 = 0.005;
pub const DEFAULT_MIN_STATIC_FRAMES: usize = 10;
pub const DEFAULT_EPS: f64 = 0.03;
pub const DEFAULT_MIN_PTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame_index: u64,
    pub x: f64,
    pub y: f64,
}

impl TrackPoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Per-frame centroid of one extremity's landmark group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremityTrack {
    pub extremity: Limb,
    pub positions: Vec<TrackPoint>,
}

/// A run of frames during which an extremity stayed (nearly) still.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticPoint {
    pub extremity: Limb,
    pub frame_start: u64,
    pub frame_end: u64,
    pub x: f64,
    pub y: f64,
    /// Per-frame positions over the run. These form the point cloud fed to
    /// hold clustering.
    #[serde(default)]
    pub samples: Vec<Point>,
}

impl StaticPoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hold {
    pub hold_id: usize,
    pub x: f64,
    pub y: f64,
}

impl Hold {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Builds the four extremity tracks (LH, RH, LF, RF). Frames are expected
/// sorted by frame index, as returned by the stream loader.
pub fn extremity_tracks(frames: &[LandmarkFrame]) -> Result<[ExtremityTrack; 4]> {
    if frames.is_empty() {
        return Err(Error::invalid("extremity_tracks needs at least one frame"));
    }
    if frames.windows(2).any(|w| w[0].frame_index >= w[1].frame_index) {
        return Err(Error::invalid("frames must be strictly ascending by frame_index"));
    }
    Ok(Limb::ALL.map(|limb| ExtremityTrack {
        extremity: limb,
        positions: frames
            .iter()
            .map(|f| {
                let c = f.extremity_centroid(limb);
                TrackPoint { frame_index: f.frame_index, x: c.x, y: c.y }
            })
            .collect(),
    }))
}

/// Maximal runs of consecutive track samples whose step displacement is
/// below `dist_threshold`, keeping runs of at least `min_static_frames`.
pub fn detect_static_points(
    track: &ExtremityTrack,
    dist_threshold: f64,
    min_static_frames: usize,
) -> Result<Vec<StaticPoint>> {
    if !(dist_threshold > 0.0) {
        return Err(Error::invalid(format!("dist_threshold must be > 0, got {dist_threshold}")));
    }
    if min_static_frames < 1 {
        return Err(Error::invalid("min_static_frames must be >= 1"));
    }
    let pos = &track.positions;
    let mut out = Vec::new();
    let mut emit = |start: usize, end: usize| {
        let run = &pos[start..=end];
        if run.len() < min_static_frames {
            return;
        }
        let n = run.len() as f64;
        let (sx, sy) = run.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        out.push(StaticPoint {
            extremity: track.extremity,
            frame_start: run[0].frame_index,
            frame_end: run[run.len() - 1].frame_index,
            x: sx / n,
            y: sy / n,
            samples: run.iter().map(TrackPoint::point).collect(),
        });
    };
    if pos.is_empty() {
        return Ok(out);
    }
    let mut start = 0;
    for k in 1..pos.len() {
        if pos[k - 1].point().distance(&pos[k].point()) >= dist_threshold {
            emit(start, k - 1);
            start = k;
        }
    }
    emit(start, pos.len() - 1);
    Ok(out)
}

/// Static points of all four tracks.
pub fn detect_all_static_points(
    tracks: &[ExtremityTrack],
    dist_threshold: f64,
    min_static_frames: usize,
) -> Result<Vec<StaticPoint>> {
    let mut all = Vec::new();
    for t in tracks {
        all.extend(detect_static_points(t, dist_threshold, min_static_frames)?);
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldClustering {
    pub holds: Vec<Hold>,
    /// One label per input static point; `Cluster(id)` refers to `holds[id]`.
    pub assignment: Vec<Label>,
}

/// Clusters the static-frame point cloud into holds.
///
/// Every per-frame sample of every static point enters DBSCAN. Each static
/// point is then assigned the majority label of its samples (ties to the
/// lower hold id; all-noise stays noise). Hold ids follow first use: the
/// hold touched by the earliest static point gets id 0.
pub fn cluster_holds(points: &[StaticPoint], eps: f64, min_pts: usize) -> Result<HoldClustering> {
    let mut cloud = Vec::new();
    let mut owner = Vec::new();
    for (i, sp) in points.iter().enumerate() {
        if sp.samples.is_empty() {
            cloud.push(sp.point());
            owner.push(i);
        } else {
            cloud.extend(sp.samples.iter().copied());
            owner.extend(std::iter::repeat_n(i, sp.samples.len()));
        }
    }
    let labels = dbscan(&cloud, eps, min_pts)?;
    let n_clusters = labels.iter().filter_map(|l| l.cluster()).max().map_or(0, |m| m + 1);

    let mut votes = vec![vec![0usize; n_clusters]; points.len()];
    let mut sums = vec![(0.0, 0.0, 0usize); n_clusters];
    for ((label, p), &o) in labels.iter().zip(&cloud).zip(&owner) {
        if let Label::Cluster(c) = *label {
            votes[o][c] += 1;
            sums[c].0 += p.x;
            sums[c].1 += p.y;
            sums[c].2 += 1;
        }
    }
    let raw_assignment: Vec<Option<usize>> = votes
        .iter()
        .map(|v| {
            let best = v.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
            (*best.1 > 0).then_some(best.0)
        })
        .collect();

    // renumber clusters by first use; clusters no static point won stay unused
    let mut remap: Vec<Option<usize>> = vec![None; n_clusters];
    let mut holds = Vec::new();
    for i in usage_order(points) {
        if let Some(c) = raw_assignment[i] {
            if remap[c].is_none() {
                let id = holds.len();
                remap[c] = Some(id);
                let (sx, sy, n) = sums[c];
                holds.push(Hold { hold_id: id, x: sx / n as f64, y: sy / n as f64 });
            }
        }
    }
    let assignment = raw_assignment
        .iter()
        .map(|a| a.and_then(|c| remap[c]).map_or(Label::Noise, Label::Cluster))
        .collect();
    Ok(HoldClustering { holds, assignment })
}

/// Indices of static points sorted by `frame_start`, then extremity.
fn usage_order(points: &[StaticPoint]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by_key(|&i| (points[i].frame_start, points[i].extremity));
    idx
}

/// One move per non-noise static point, placed on its hold centroid and
/// ordered by `frame_start` (ties: LH < RH < LF < RF).
pub fn extract_move_sequence(
    static_points: &[StaticPoint],
    holds: &[Hold],
    assignment: &[Label],
) -> Result<MoveSequence> {
    if assignment.len() != static_points.len() {
        return Err(Error::invalid(format!(
            "assignment has {} labels for {} static points",
            assignment.len(),
            static_points.len()
        )));
    }
    let mut moves = Vec::new();
    for i in usage_order(static_points) {
        let Label::Cluster(h) = assignment[i] else { continue };
        let hold = holds
            .iter()
            .find(|hd| hd.hold_id == h)
            .ok_or_else(|| Error::invalid(format!("static point {i} refers to unknown hold {h}")))?;
        moves.push((hold.point(), static_points[i].extremity));
    }
    Ok(MoveSequence::from_moves(moves))
}

/// Configuration of the landmarks-to-moves pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub dist_threshold: f64,
    pub min_static_frames: usize,
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            dist_threshold: DEFAULT_DIST_THRESHOLD,
            min_static_frames: DEFAULT_MIN_STATIC_FRAMES,
            eps: DEFAULT_EPS,
            min_pts: DEFAULT_MIN_PTS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub static_points: Vec<StaticPoint>,
    pub clustering: HoldClustering,
    pub moves: MoveSequence,
}

/// Runs tracks, static detection, clustering and move extraction.
pub fn analyze_stream(frames: &[LandmarkFrame], cfg: &DetectionConfig) -> Result<PipelineOutput> {
    let tracks = extremity_tracks(frames)?;
    let static_points = detect_all_static_points(&tracks, cfg.dist_threshold, cfg.min_static_frames)?;
    let clustering = cluster_holds(&static_points, cfg.eps, cfg.min_pts)?;
    let moves = extract_move_sequence(&static_points, &clustering.holds, &clustering.assignment)?;
    Ok(PipelineOutput { static_points, clustering, moves })
}
