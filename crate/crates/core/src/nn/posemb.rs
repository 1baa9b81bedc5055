use crate::error::{Error, Result};
use crate::sequence::Point;

pub const DEFAULT_BASE: f64 = 10_000.0;
pub const DEFAULT_POS_SCALE: f64 = 100.0;

/// `out[2i] = sin(value / base^(2i/dim))`, `out[2i+1] = cos(...)`.
pub fn sinusoidal_embedding(value: f64, dim: usize, base: f64) -> Result<Vec<f64>> {
    if !dim.is_multiple_of(2) || dim == 0 {
        return Err(Error::invalid(format!("sinusoidal embedding dim must be even and positive, got {dim}")));
    }
    let mut out = vec![0.0; dim];
    for i in 0..dim / 2 {
        let angle = value / base.powf(2.0 * i as f64 / dim as f64);
        out[2 * i] = angle.sin();
        out[2 * i + 1] = angle.cos();
    }
    Ok(out)
}

/// Coordinate embedding: the first half encodes `x * scale`, the second
/// half `y * scale`. `dim` must be a multiple of 4.
pub fn coordinate_embedding(p: Point, dim: usize, scale: f64, base: f64) -> Result<Vec<f64>> {
    if !dim.is_multiple_of(4) {
        return Err(Error::invalid(format!("coordinate embedding dim must be a multiple of 4, got {dim}")));
    }
    let mut out = sinusoidal_embedding(p.x * scale, dim / 2, base)?;
    out.extend(sinusoidal_embedding(p.y * scale, dim / 2, base)?);
    Ok(out)
}
