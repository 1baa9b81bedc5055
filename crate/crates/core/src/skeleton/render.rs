use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::landmarks::LandmarkFrame;
use crate::skeleton::clip::AnimationClip;

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const BONE: Rgb<u8> = Rgb([40, 40, 40]);
const JOINT: Rgb<u8> = Rgb([200, 30, 30]);
const JOINT_RADIUS: i64 = 2;

/// Pixel position of a normalized coordinate.
pub fn to_pixel(x: f64, y: f64, width: u32, height: u32) -> (f64, f64) {
    (x * width as f64, y * height as f64)
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn draw_line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), color: Rgb<u8>) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().clamp(1.0, 1e5) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        put(img, (x0 + (x1 - x0) * t).floor() as i64, (y0 + (y1 - y0) * t).floor() as i64, color);
    }
}

fn draw_dot(img: &mut RgbImage, (x, y): (f64, f64), color: Rgb<u8>) {
    let (cx, cy) = (x.floor() as i64, y.floor() as i64);
    for dy in -JOINT_RADIUS..=JOINT_RADIUS {
        for dx in -JOINT_RADIUS..=JOINT_RADIUS {
            if dx * dx + dy * dy <= JOINT_RADIUS * JOINT_RADIUS {
                put(img, cx + dx, cy + dy, color);
            }
        }
    }
}

pub fn render_frame(frame: &LandmarkFrame, width: u32, height: u32, edges: &[(usize, usize)]) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    let px = |i: usize| to_pixel(frame.landmarks[i].x, frame.landmarks[i].y, width, height);
    for &(a, b) in edges {
        draw_line(&mut img, px(a), px(b), BONE);
    }
    for i in 0..frame.landmarks.len() {
        draw_dot(&mut img, px(i), JOINT);
    }
    img
}

/// One image per clip frame.
pub fn render_frames(clip: &AnimationClip, width: u32, height: u32, edges: &[(usize, usize)]) -> Result<Vec<RgbImage>> {
    check_canvas(width, height, edges)?;
    Ok(clip.frames.par_iter().map(|f| render_frame(f, width, height, edges)).collect())
}

fn check_canvas(width: u32, height: u32, edges: &[(usize, usize)]) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!("canvas must be non-empty, got {width}x{height}")));
    }
    if let Some(e) = edges.iter().find(|(a, b)| *a >= 33 || *b >= 33) {
        return Err(Error::invalid(format!("edge {e:?} references a missing landmark")));
    }
    Ok(())
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

/// Renders and writes `frame_00000.png`, `frame_00001.png`, … into `dir`.
pub fn write_frames(
    clip: &AnimationClip,
    dir: &Path,
    width: u32,
    height: u32,
    edges: &[(usize, usize)],
) -> Result<Vec<PathBuf>> {
    check_canvas(width, height, edges)?;
    std::fs::create_dir_all(dir)?;
    clip.frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let path = dir.join(frame_file_name(i));
            render_frame(f, width, height, edges).save(&path).map_err(|e| Error::Image(e.to_string()))?;
            Ok(path)
        })
        .collect()
}
