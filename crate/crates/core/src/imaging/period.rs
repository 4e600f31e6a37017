//! Ridge period estimation and ridge-frequency normalization.

use crate::error::{Error, Result};
use crate::features::orientation::{BlockAnalysis, GradientField};
use crate::features::signature::{autocorrelation_period, longest_defined_run, OrientedPatch};
use crate::filters::{resize_gray, resize_mask, round_dim};
use crate::raster::{ForegroundMask, GrayRaster};

pub const PERIOD_BLOCK_PX: usize = 32;
/// Signature length across the ridges, in pixels.
const WINDOW_ACROSS: usize = 64;
/// Averaging extent along the ridges, in pixels.
const WINDOW_ALONG: usize = 16;
/// Shortest usable signature.
const MIN_SIGNATURE: usize = 24;
/// Normalized autocorrelation a peak must reach to count as periodic.
pub const MIN_PEAK_CORRELATION: f64 = 0.5;
/// Share of valid blocks that must show a period; isolated chance peaks in
/// unstructured texture stay below it.
pub const MIN_PERIODIC_FRACTION: f64 = 0.1;

/// Per-block dominant periods for every foreground block that shows one;
/// empty when too few blocks do.
pub fn block_periods(img: &GrayRaster, mask: &ForegroundMask) -> Result<Vec<f64>> {
    let f = img.to_float();
    let field = GradientField::new(&f, mask);
    let blocks = BlockAnalysis::from_field(&field, mask, PERIOD_BLOCK_PX)?;
    if !(0..blocks.grid.len()).any(|i| blocks.is_covered(i)) {
        return Err(Error::PeriodEstimation("no foreground block of 32x32 px".into()));
    }
    let mut periods = Vec::new();
    let mut valid = 0usize;
    for row in 0..blocks.grid.rows {
        for col in 0..blocks.grid.cols {
            let i = row * blocks.grid.cols + col;
            if !blocks.is_valid(i) {
                continue;
            }
            valid += 1;
            let (cx, cy) = blocks.grid.center(col, row);
            let angle = blocks.tensors[i].ridge_angle();
            let patch = OrientedPatch::sample(&f, Some(mask), cx, cy, angle, WINDOW_ACROSS, WINDOW_ALONG, 1.0);
            let sig = longest_defined_run(&patch.signature());
            if sig.len() < MIN_SIGNATURE {
                continue;
            }
            if let Some(p) = autocorrelation_period(&sig, MIN_PEAK_CORRELATION) {
                periods.push(p);
            }
        }
    }
    if (periods.len() as f64) < MIN_PERIODIC_FRACTION * valid as f64 {
        periods.clear();
    }
    Ok(periods)
}

/// Median over foreground blocks of the dominant ridge period, in pixels.
pub fn estimate_ridge_period(img: &GrayRaster, mask: &ForegroundMask) -> Result<f64> {
    if !mask.matches(img) {
        return Err(Error::InvalidParam("mask dimensions differ from image".into()));
    }
    let mut periods = block_periods(img, mask)?;
    if periods.is_empty() {
        return Err(Error::PeriodEstimation("no block shows a dominant periodicity".into()));
    }
    periods.sort_by(f64::total_cmp);
    let n = periods.len();
    Ok(if n % 2 == 1 { periods[n / 2] } else { 0.5 * (periods[n / 2 - 1] + periods[n / 2]) })
}

fn checked_scale(measured_period: f64, target: f64) -> Result<f64> {
    if !(measured_period > 0.0 && target > 0.0) {
        return Err(Error::InvalidParam(format!(
            "periods must be positive (measured {measured_period}, target {target})"
        )));
    }
    let scale = target / measured_period;
    if !(0.1..=10.0).contains(&scale) {
        return Err(Error::ImplausibleScale(scale));
    }
    Ok(scale)
}

/// Resamples so that a ridge period of `measured_period` becomes `target`.
pub fn normalize_ridge_frequency(img: &GrayRaster, measured_period: f64, target: f64) -> Result<GrayRaster> {
    let scale = checked_scale(measured_period, target)?;
    let (w, h) = scaled_dims(img.width(), img.height(), scale);
    Ok(resize_gray(img, w, h))
}

/// Same as [`normalize_ridge_frequency`] and also resamples the mask.
pub fn normalize_with_mask(
    img: &GrayRaster,
    mask: &ForegroundMask,
    measured_period: f64,
    target: f64,
) -> Result<(GrayRaster, ForegroundMask, f64)> {
    let scale = checked_scale(measured_period, target)?;
    let (w, h) = scaled_dims(img.width(), img.height(), scale);
    Ok((resize_gray(img, w, h), resize_mask(mask, w, h), scale))
}

pub fn scaled_dims(w: usize, h: usize, scale: f64) -> (usize, usize) {
    (round_dim(w as f64 * scale), round_dim(h as f64 * scale))
}
