//! Move sequences and holds sequences.
//!
//! Coordinates are normalized to `[0, 1]` with the origin at the top-left
//! corner and `y` increasing downward, the same convention as image pixels.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D point in normalized board coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One of the four end-effectors of the climber.
///
/// The declaration order (`LH < RH < LF < RF`) is the tie-break order used
/// when two extremities settle on a hold in the same frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Limb {
    #[serde(rename = "LH")]
    LeftHand,
    #[serde(rename = "RH")]
    RightHand,
    #[serde(rename = "LF")]
    LeftFoot,
    #[serde(rename = "RF")]
    RightFoot,
}

impl Limb {
    pub const ALL: [Limb; 4] = [Limb::LeftHand, Limb::RightHand, Limb::LeftFoot, Limb::RightFoot];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            Limb::LeftHand => "LH",
            Limb::RightHand => "RH",
            Limb::LeftFoot => "LF",
            Limb::RightFoot => "RF",
        }
    }
}

impl fmt::Display for Limb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Limb {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "LH" => Ok(Limb::LeftHand),
            "RH" => Ok(Limb::RightHand),
            "LF" => Ok(Limb::LeftFoot),
            "RF" => Ok(Limb::RightFoot),
            other => Err(Error::Parse(format!("unknown limb `{other}` (expected LH, RH, LF or RF)"))),
        }
    }
}

/// A single move: `limb` goes to the hold at `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub x: f64,
    pub y: f64,
    pub limb: Limb,
    #[serde(default)]
    pub order_index: usize,
}

impl Move {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Ordered list of moves. `order_index` always runs `0..n` without gaps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MoveSequence {
    pub moves: Vec<Move>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MoveRow {
    x: f64,
    y: f64,
    limb: Limb,
}

impl MoveSequence {
    /// Builds a sequence from `(point, limb)` pairs in usage order.
    pub fn from_moves(moves: impl IntoIterator<Item = (Point, Limb)>) -> Self {
        let moves = moves
            .into_iter()
            .enumerate()
            .map(|(i, (p, limb))| Move { x: p.x, y: p.y, limb, order_index: i })
            .collect();
        Self { moves }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Rewrites `order_index` to match the vector position.
    pub fn renumber(&mut self) {
        for (i, m) in self.moves.iter_mut().enumerate() {
            m.order_index = i;
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.moves.iter().enumerate() {
            check_unit("x", m.x).map_err(|e| Error::Parse(format!("move {i}: {e}")))?;
            check_unit("y", m.y).map_err(|e| Error::Parse(format!("move {i}: {e}")))?;
            if m.order_index != i {
                return Err(Error::Parse(format!(
                    "move {i}: order_index {} breaks the 0..n sequence",
                    m.order_index
                )));
            }
        }
        Ok(())
    }

    /// Reads the `x,y,limb` CSV layout. Row order is move order.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "y", "limb"] {
            return Err(Error::Parse(format!(
                "move sequence header must be `x,y,limb`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut out = Vec::new();
        for (i, row) in rdr.deserialize::<MoveRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse(format!("move row {i}: {e}")))?;
            out.push((Point::new(row.x, row.y), row.limb));
        }
        let seq = Self::from_moves(out);
        seq.validate()?;
        Ok(seq)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for m in &self.moves {
            wtr.serialize(MoveRow { x: m.x, y: m.y, limb: m.limb })
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Distinct holds in first-use order, plus the hold index used by each move.
    pub fn distinct_holds(&self) -> (Vec<Point>, Vec<usize>) {
        let mut holds: Vec<Point> = Vec::new();
        let mut assignment = Vec::with_capacity(self.moves.len());
        for m in &self.moves {
            let p = m.point();
            let idx = match holds.iter().position(|h| *h == p) {
                Some(idx) => idx,
                None => {
                    holds.push(p);
                    holds.len() - 1
                }
            };
            assignment.push(idx);
        }
        (holds, assignment)
    }

    /// The holds sequence implied by this move sequence: distinct holds, with
    /// `order` giving first-use order.
    pub fn to_holds_sequence(&self) -> HoldsSequence {
        let (holds, _) = self.distinct_holds();
        let order = (0..holds.len()).collect();
        HoldsSequence { holds, order: Some(order) }
    }
}

/// Unordered set of hold coordinates. When present, `order` lists indices
/// into `holds` in the order the climber uses them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HoldsSequence {
    pub holds: Vec<Point>,
    pub order: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct HoldsSequenceJson {
    holds: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<Vec<usize>>,
}

impl Serialize for HoldsSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HoldsSequenceJson {
            holds: self.holds.iter().map(|p| [p.x, p.y]).collect(),
            order: self.order.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HoldsSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = HoldsSequenceJson::deserialize(d)?;
        Ok(HoldsSequence {
            holds: raw.holds.into_iter().map(|[x, y]| Point::new(x, y)).collect(),
            order: raw.order,
        })
    }
}

impl HoldsSequence {
    pub fn new(holds: Vec<Point>) -> Self {
        Self { holds, order: None }
    }

    pub fn len(&self) -> usize {
        self.holds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holds.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.holds.iter().enumerate() {
            check_unit("x", p.x).map_err(|e| Error::Parse(format!("holds[{i}]: {e}")))?;
            check_unit("y", p.y).map_err(|e| Error::Parse(format!("holds[{i}]: {e}")))?;
        }
        if let Some(order) = &self.order {
            if !is_permutation(order, self.holds.len()) {
                return Err(Error::Parse(format!(
                    "order must be a permutation of 0..{}, got {order:?}",
                    self.holds.len()
                )));
            }
        }
        Ok(())
    }

    /// Holds in usage order, if an order is known.
    pub fn sorted(&self) -> Option<Vec<Point>> {
        self.order.as_ref().map(|o| o.iter().map(|&i| self.holds[i]).collect())
    }
}

pub(crate) fn is_permutation(ids: &[usize], n: usize) -> bool {
    if ids.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in ids {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

pub(crate) fn check_unit(field: &str, v: f64) -> std::result::Result<(), String> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(format!("{field} = {v} is outside [0, 1]"))
    }
}
