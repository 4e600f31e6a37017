//! Analytic test patterns.

use crate::raster::{clamp_u8, GrayRaster};

/// Coordinate across ridges running at `ridge_angle` (radians, image axes,
/// π/2 = vertical ridges).
fn across(x: usize, y: usize, ridge_angle: f64) -> f64 {
    -(x as f64) * ridge_angle.sin() + y as f64 * ridge_angle.cos()
}

/// `128 + 100·cos(2π·u/period + phase)` with `u` measured across the ridges.
pub fn sinusoid_grating(width: usize, height: usize, period: f64, ridge_angle: f64, phase: f64) -> GrayRaster {
    let k = std::f64::consts::TAU / period;
    GrayRaster::from_fn(width, height, |x, y| clamp_u8(128.0 + 100.0 * (k * across(x, y, ridge_angle) + phase).cos()))
        .expect("non-empty grating")
}

/// Two-level grating, 50% duty cycle: ridges 40, valleys 210.
pub fn square_grating(width: usize, height: usize, period: f64, ridge_angle: f64) -> GrayRaster {
    GrayRaster::from_fn(width, height, |x, y| {
        let u = across(x, y, ridge_angle).rem_euclid(period);
        if u < period / 2.0 {
            40
        } else {
            210
        }
    })
    .expect("non-empty grating")
}
