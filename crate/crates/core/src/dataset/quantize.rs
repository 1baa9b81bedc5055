use crate::error::{Error, Result};

/// Rounds `c ∈ [0, 1]` to `decimals` decimal places, halves away from zero.
///
/// Halfway cases are judged on the decimal value the caller wrote: `0.15`
/// is stored as `0.1499…` but still rounds up to `0.2`.
pub fn quantize_coordinate(c: f64, decimals: u32) -> Result<f64> {
    if !(c.is_finite() && (0.0..=1.0).contains(&c)) {
        return Err(Error::invalid(format!("coordinate {c} is outside [0, 1]")));
    }
    let scale = 10f64.powi(decimals as i32);
    let scaled = c * scale;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let steps = if (frac - 0.5).abs() < 1e-9 { floor + 1.0 } else { scaled.round() };
    Ok(steps / scale)
}

/// Quantized coordinate formatted with exactly `decimals` digits.
pub fn coordinate_word(c: f64, decimals: u32) -> Result<String> {
    let q = quantize_coordinate(c, decimals)?;
    Ok(format!("{:.*}", decimals as usize, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(quantize_coordinate(0.234, 1).unwrap(), 0.2);
        assert_eq!(quantize_coordinate(0.05, 1).unwrap(), 0.1);
        assert_eq!(quantize_coordinate(1.0, 1).unwrap(), 1.0);
        assert_eq!(quantize_coordinate(0.15, 1).unwrap(), 0.2);
        assert_eq!(quantize_coordinate(0.0, 1).unwrap(), 0.0);
        assert_eq!(coordinate_word(0.96, 1).unwrap(), "1.0");
    }

    #[test]
    fn out_of_range() {
        assert!(quantize_coordinate(-0.01, 1).is_err());
        assert!(quantize_coordinate(1.2, 1).is_err());
        assert!(quantize_coordinate(f64::NAN, 1).is_err());
    }

    proptest! {
        #[test]
        fn idempotent(c in 0.0f64..=1.0, d in 0u32..4) {
            let q = quantize_coordinate(c, d).unwrap();
            prop_assert_eq!(quantize_coordinate(q, d).unwrap(), q);
            prop_assert!((q - c).abs() <= 0.5 / 10f64.powi(d as i32) + 1e-9);
        }

        #[test]
        fn one_decimal_lands_on_grid(c in 0.0f64..=1.0) {
            let q = quantize_coordinate(c, 1).unwrap();
            let k = (q * 10.0).round();
            prop_assert_eq!(q, k / 10.0);
            prop_assert!((0.0..=10.0).contains(&k));
        }
    }
}
