//! Pose landmark frames and the 33-point pose topology.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Limb, Point};

pub const NUM_LANDMARKS: usize = 33;

/// Landmark indices forming each extremity group, indexed by [`Limb::index`].
///
/// Hands: wrist, pinky, index, thumb. Feet: ankle, heel, foot index.
pub const EXTREMITY_GROUPS: [&[usize]; 4] = [
    &[15, 17, 19, 21],
    &[16, 18, 20, 22],
    &[27, 29, 31],
    &[28, 30, 32],
];

/// Landmarks that are not part of any extremity group (head, shoulders,
/// elbows, hips, knees), in ascending index order.
pub const BODY_LANDMARKS: [usize; 19] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 23, 24, 25, 26];

/// Skeleton edges of the 33-point pose topology.
pub const POSE_EDGES: [(usize, usize); 35] = [
    (0, 1), (1, 2), (2, 3), (3, 7), (0, 4), (4, 5), (5, 6), (6, 8), (9, 10),
    (11, 12), (11, 13), (13, 15), (15, 17), (15, 19), (15, 21), (17, 19),
    (12, 14), (14, 16), (16, 18), (16, 20), (16, 22), (18, 20),
    (11, 23), (12, 24), (23, 24), (23, 25), (24, 26), (25, 27), (26, 28),
    (27, 29), (28, 30), (29, 31), (30, 32), (27, 31), (28, 32),
];

/// Extremity owning a landmark index, if any.
pub fn extremity_of(landmark: usize) -> Option<Limb> {
    Limb::ALL.into_iter().find(|l| EXTREMITY_GROUPS[l.index()].contains(&landmark))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    pub visibility: f64,
}

impl Landmark {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// One video frame worth of landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub frame_index: u64,
    pub landmarks: [Landmark; NUM_LANDMARKS],
}

impl LandmarkFrame {
    /// Centroid of an extremity's landmark group. Visibility is ignored.
    pub fn extremity_centroid(&self, limb: Limb) -> Point {
        let group = EXTREMITY_GROUPS[limb.index()];
        let (sx, sy) = group
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &i| (sx + self.landmarks[i].x, sy + self.landmarks[i].y));
        let n = group.len() as f64;
        Point::new(sx / n, sy / n)
    }

    fn validate(&self) -> Result<()> {
        for (i, lm) in self.landmarks.iter().enumerate() {
            for (name, v) in [("x", lm.x), ("y", lm.y), ("v", lm.visibility)] {
                if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                    return Err(Error::Landmark {
                        frame: self.frame_index.to_string(),
                        field: format!("l{i}_{name}"),
                        reason: format!("value {v} outside [0, 1]"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Csv,
    Json,
}

impl std::str::FromStr for StreamFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(StreamFormat::Csv),
            "json" => Ok(StreamFormat::Json),
            other => Err(Error::invalid(format!("unknown landmark format `{other}`"))),
        }
    }
}

impl StreamFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => StreamFormat::Json,
            _ => StreamFormat::Csv,
        }
    }
}

pub fn csv_header() -> Vec<String> {
    let mut h = Vec::with_capacity(1 + 3 * NUM_LANDMARKS);
    h.push("frame".to_string());
    for i in 0..NUM_LANDMARKS {
        h.push(format!("l{i}_x"));
        h.push(format!("l{i}_y"));
        h.push(format!("l{i}_v"));
    }
    h
}

/// Parses a landmark stream and returns frames sorted by frame index.
pub fn load_landmark_stream<R: Read>(source: R, format: StreamFormat) -> Result<Vec<LandmarkFrame>> {
    let mut frames = match format {
        StreamFormat::Csv => parse_csv(source)?,
        StreamFormat::Json => parse_json(source)?,
    };
    frames.sort_by_key(|f| f.frame_index);
    if let Some(w) = frames.windows(2).find(|w| w[0].frame_index == w[1].frame_index) {
        return Err(Error::Landmark {
            frame: w[0].frame_index.to_string(),
            field: "frame".into(),
            reason: "duplicate frame index".into(),
        });
    }
    Ok(frames)
}

fn parse_csv<R: Read>(source: R) -> Result<Vec<LandmarkFrame>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(source);
    let header = rdr.headers().map_err(|e| Error::Parse(format!("landmark csv header: {e}")))?.clone();
    let expected = csv_header();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(Error::Parse(format!(
            "landmark csv header must be `frame,l0_x,l0_y,l0_v,...,l32_v` ({} columns), found {} columns",
            expected.len(),
            header.len()
        )));
    }
    let mut frames = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("landmark csv row {row_no}: {e}")))?;
        let frame_label = record.get(0).unwrap_or("").to_string();
        let frame_label = if frame_label.is_empty() { format!("row {row_no}") } else { frame_label };
        if record.len() != expected.len() {
            return Err(Error::Landmark {
                frame: frame_label,
                field: "row".into(),
                reason: format!(
                    "expected {} landmark features, found {}",
                    3 * NUM_LANDMARKS,
                    record.len().saturating_sub(1)
                ),
            });
        }
        let frame_index: u64 = record[0].parse().map_err(|_| Error::Landmark {
            frame: frame_label.clone(),
            field: "frame".into(),
            reason: format!("`{}` is not a nonnegative integer", &record[0]),
        })?;
        let mut landmarks = [Landmark::default(); NUM_LANDMARKS];
        for (i, lm) in landmarks.iter_mut().enumerate() {
            let mut vals = [0.0; 3];
            for (k, v) in vals.iter_mut().enumerate() {
                let col = 1 + 3 * i + k;
                *v = record[col].parse().map_err(|_| Error::Landmark {
                    frame: frame_label.clone(),
                    field: expected[col].clone(),
                    reason: format!("`{}` is not a number", &record[col]),
                })?;
            }
            *lm = Landmark { x: vals[0], y: vals[1], visibility: vals[2] };
        }
        let frame = LandmarkFrame { frame_index, landmarks };
        frame.validate()?;
        frames.push(frame);
    }
    Ok(frames)
}

#[derive(Serialize, Deserialize)]
struct JsonFrame {
    frame: u64,
    landmarks: Vec<Vec<f64>>,
}

fn parse_json<R: Read>(source: R) -> Result<Vec<LandmarkFrame>> {
    let raw: Vec<JsonFrame> = serde_json::from_reader(source)?;
    raw.into_iter()
        .map(|jf| {
            let frame = jf.frame.to_string();
            if jf.landmarks.len() != NUM_LANDMARKS {
                return Err(Error::Landmark {
                    frame,
                    field: "landmarks".into(),
                    reason: format!("expected {NUM_LANDMARKS} landmarks, found {}", jf.landmarks.len()),
                });
            }
            let mut landmarks = [Landmark::default(); NUM_LANDMARKS];
            for (i, (lm, v)) in landmarks.iter_mut().zip(&jf.landmarks).enumerate() {
                if v.len() != 3 {
                    return Err(Error::Landmark {
                        frame,
                        field: format!("landmarks[{i}]"),
                        reason: format!("expected [x, y, v], found {} values", v.len()),
                    });
                }
                *lm = Landmark { x: v[0], y: v[1], visibility: v[2] };
            }
            let f = LandmarkFrame { frame_index: jf.frame, landmarks };
            f.validate()?;
            Ok(f)
        })
        .collect()
}

pub fn write_landmark_csv<W: Write>(frames: &[LandmarkFrame], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wtr.write_record(csv_header()).map_err(io)?;
    for f in frames {
        let mut rec = Vec::with_capacity(1 + 3 * NUM_LANDMARKS);
        rec.push(f.frame_index.to_string());
        for lm in &f.landmarks {
            rec.push(lm.x.to_string());
            rec.push(lm.y.to_string());
            rec.push(lm.visibility.to_string());
        }
        wtr.write_record(&rec).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_landmark_json<W: Write>(frames: &[LandmarkFrame], writer: W) -> Result<()> {
    let raw: Vec<JsonFrame> = frames
        .iter()
        .map(|f| JsonFrame {
            frame: f.frame_index,
            landmarks: f.landmarks.iter().map(|l| vec![l.x, l.y, l.visibility]).collect(),
        })
        .collect();
    serde_json::to_writer(writer, &raw)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(idx: u64, x: f64) -> LandmarkFrame {
        LandmarkFrame {
            frame_index: idx,
            landmarks: [Landmark { x, y: 0.5, visibility: 1.0 }; NUM_LANDMARKS],
        }
    }

    #[test]
    fn groups_partition_the_skeleton() {
        let mut all: Vec<usize> = EXTREMITY_GROUPS.iter().flat_map(|g| g.iter().copied()).collect();
        all.extend(BODY_LANDMARKS);
        all.sort_unstable();
        assert_eq!(all, (0..NUM_LANDMARKS).collect::<Vec<_>>());
        assert_eq!(extremity_of(21), Some(Limb::LeftHand));
        assert_eq!(extremity_of(32), Some(Limb::RightFoot));
        assert_eq!(extremity_of(0), None);
    }

    #[test]
    fn two_frame_csv_roundtrip() {
        let frames = vec![frame(0, 0.25), frame(1, 0.75)];
        let mut buf = Vec::new();
        write_landmark_csv(&frames, &mut buf).unwrap();
        let back = load_landmark_stream(&buf[..], StreamFormat::Csv).unwrap();
        assert_eq!(back, frames);
    }

    #[test]
    fn json_roundtrip_and_sorting() {
        let frames = vec![frame(5, 0.1), frame(2, 0.2)];
        let mut buf = Vec::new();
        write_landmark_json(&frames, &mut buf).unwrap();
        let back = load_landmark_stream(&buf[..], StreamFormat::Json).unwrap();
        assert_eq!(back.iter().map(|f| f.frame_index).collect::<Vec<_>>(), vec![2, 5]);
    }

    #[test]
    fn short_row_names_the_frame() {
        let mut buf = Vec::new();
        write_landmark_csv(&[frame(7, 0.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // drop the final visibility column: 98 features
        let cut = lines[1].rfind(',').unwrap();
        lines[1].truncate(cut);
        let err = load_landmark_stream(lines.join("\n").as_bytes(), StreamFormat::Csv).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("frame 7"), "{msg}");
        assert!(msg.contains("98"), "{msg}");
    }

    #[test]
    fn out_of_range_names_field() {
        let mut f = frame(3, 0.5);
        f.landmarks[4].y = 1.5;
        let mut buf = Vec::new();
        write_landmark_csv(&[f], &mut buf).unwrap();
        let msg = load_landmark_stream(&buf[..], StreamFormat::Csv).unwrap_err().to_string();
        assert!(msg.contains("frame 3") && msg.contains("l4_y"), "{msg}");
    }

    #[test]
    fn json_wrong_count() {
        let text = r#"[{"frame": 9, "landmarks": [[0.1, 0.1, 1.0]]}]"#;
        let msg = load_landmark_stream(text.as_bytes(), StreamFormat::Json).unwrap_err().to_string();
        assert!(msg.contains("frame 9"), "{msg}");
    }

    #[test]
    fn duplicate_frames_rejected() {
        let mut buf = Vec::new();
        write_landmark_csv(&[frame(1, 0.5), frame(1, 0.4)], &mut buf).unwrap();
        assert!(load_landmark_stream(&buf[..], StreamFormat::Csv).is_err());
    }
}
