//! Move sequences to full-body animation.

pub mod clip;
pub mod interpolate;
pub mod regressor;
pub mod render;

pub use clip::{synthesize_clip, AnimationClip, DEFAULT_FPS};
pub use interpolate::{
    avg_frames_for_total, interpolate_extremities, move_frame_counts, start_pose_of, Arrival, ExtremityTrajectory,
    REST_POSE,
};
pub use regressor::BodyRegressor;
pub use render::{render_frames, to_pixel, write_frames};
