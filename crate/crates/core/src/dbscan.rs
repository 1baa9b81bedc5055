//! Density-based clustering (DBSCAN) over 2D points with Euclidean distance.
//!
//! A point is *core* when at least `min_pts` points (itself included) lie
//! within `eps`. Clusters are the connected components of the graph whose
//! vertices are core points and whose edges join core points within `eps`.
//! A non-core point within `eps` of some core point is a border point and
//! joins the cluster of its nearest core point; remaining points are noise.
//!
//! Resolving border points by nearest core point (ties broken by the core
//! point's coordinates) makes the partition independent of input order,
//! unlike the classic first-come expansion.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sequence::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Noise,
    Cluster(usize),
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Cluster(c) => Some(c),
            Label::Noise => None,
        }
    }
}

/// Uniform grid with cell side `eps`; every neighbor of a point lies in the
/// 3x3 block of cells around it.
struct Grid {
    eps: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[Point], eps: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::cell(p, eps)).or_default().push(i);
        }
        Self { eps, cells }
    }

    fn cell(p: &Point, eps: f64) -> (i64, i64) {
        ((p.x / eps).floor() as i64, (p.y / eps).floor() as i64)
    }

    fn neighbors(&self, points: &[Point], i: usize) -> Vec<usize> {
        let p = &points[i];
        let (cx, cy) = Self::cell(p, self.eps);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    out.extend(bucket.iter().copied().filter(|&j| p.distance(&points[j]) <= self.eps));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Labels every point with a cluster id (contiguous from 0, numbered by the
/// lowest-index core point of each cluster) or [`Label::Noise`].
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Result<Vec<Label>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("dbscan eps must be > 0, got {eps}")));
    }
    if min_pts < 1 {
        return Err(Error::invalid("dbscan min_pts must be >= 1"));
    }
    if let Some(p) = points.iter().find(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::NonFinite(format!("dbscan point {p:?}")));
    }

    let grid = Grid::new(points, eps);
    let neighbors: Vec<Vec<usize>> = (0..points.len()).map(|i| grid.neighbors(points, i)).collect();
    let core: Vec<bool> = neighbors.iter().map(|n| n.len() >= min_pts).collect();

    let mut labels = vec![Label::Noise; points.len()];
    let mut assigned = vec![false; points.len()];
    let mut next_cluster = 0;
    let mut stack = Vec::new();
    for start in 0..points.len() {
        if !core[start] || assigned[start] {
            continue;
        }
        let id = next_cluster;
        next_cluster += 1;
        assigned[start] = true;
        labels[start] = Label::Cluster(id);
        stack.push(start);
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if core[j] && !assigned[j] {
                    assigned[j] = true;
                    labels[j] = Label::Cluster(id);
                    stack.push(j);
                }
            }
        }
    }

    for i in 0..points.len() {
        if core[i] {
            continue;
        }
        let nearest = neighbors[i]
            .iter()
            .copied()
            .filter(|&j| core[j])
            .min_by(|&a, &b| {
                let (pa, pb) = (&points[a], &points[b]);
                let da = points[i].distance(pa);
                let db = points[i].distance(pb);
                da.total_cmp(&db).then(pa.x.total_cmp(&pb.x)).then(pa.y.total_cmp(&pb.y))
            });
        if let Some(j) = nearest {
            labels[i] = labels[j];
        }
    }
    Ok(labels)
}
