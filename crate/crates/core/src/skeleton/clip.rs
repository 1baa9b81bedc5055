use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmarks::{Landmark, LandmarkFrame, BODY_LANDMARKS, EXTREMITY_GROUPS, NUM_LANDMARKS};
use crate::skeleton::interpolate::ExtremityTrajectory;
use crate::skeleton::regressor::BodyRegressor;

pub const DEFAULT_FPS: f64 = 30.0;

/// Full-body animation; every landmark has visibility 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AnimationClip {
    pub fps: f64,
    pub frames: Vec<LandmarkFrame>,
}

#[derive(Serialize, Deserialize)]
struct ClipFrameJson {
    landmarks: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ClipJson {
    fps: f64,
    #[serde(default)]
    frames_total: Option<usize>,
    frames: Vec<ClipFrameJson>,
}

impl AnimationClip {
    pub fn frames_total(&self) -> usize {
        self.frames.len()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("clip serializes")
    }
}

impl Serialize for AnimationClip {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ClipJson {
            fps: self.fps,
            frames_total: Some(self.frames.len()),
            frames: self
                .frames
                .iter()
                .map(|f| ClipFrameJson { landmarks: f.landmarks.iter().map(|l| [l.x, l.y]).collect() })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AnimationClip {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ClipJson::deserialize(d)?;
        if raw.frames_total.is_some_and(|n| n != raw.frames.len()) {
            return Err(D::Error::custom("frames_total does not match the number of frames"));
        }
        let frames = raw
            .frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                if f.landmarks.len() != NUM_LANDMARKS {
                    return Err(D::Error::custom(format!(
                        "frame {i}: expected {NUM_LANDMARKS} landmarks, found {}",
                        f.landmarks.len()
                    )));
                }
                let landmarks = std::array::from_fn(|k| Landmark { x: f.landmarks[k][0], y: f.landmarks[k][1], visibility: 1.0 });
                Ok(LandmarkFrame { frame_index: i as u64, landmarks })
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(AnimationClip { fps: raw.fps, frames })
    }
}

/// Extremity groups from the trajectory, body landmarks from the regressor.
pub fn synthesize_clip(traj: &ExtremityTrajectory, reg: &BodyRegressor, fps: f64) -> Result<AnimationClip> {
    reg.validate()?;
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::invalid(format!("fps must be positive, got {fps}")));
    }
    let mut clamped_frames = 0;
    let frames = traj
        .frames
        .iter()
        .enumerate()
        .map(|(i, ext)| {
            let mut landmarks = [Landmark { x: 0.0, y: 0.0, visibility: 1.0 }; NUM_LANDMARKS];
            for (g, group) in EXTREMITY_GROUPS.iter().enumerate() {
                for &idx in *group {
                    landmarks[idx].x = ext[g].x;
                    landmarks[idx].y = ext[g].y;
                }
            }
            let (body, clamped) = reg.predict(ext);
            clamped_frames += clamped as usize;
            for (p, &idx) in body.iter().zip(&BODY_LANDMARKS) {
                landmarks[idx].x = p.x;
                landmarks[idx].y = p.y;
            }
            LandmarkFrame { frame_index: i as u64, landmarks }
        })
        .collect();
    if clamped_frames > 0 {
        log::warn!("body regressor output clamped in {clamped_frames} of {} frames", traj.len());
    }
    Ok(AnimationClip { fps, frames })
}
