//! Per-block quality component families.
//!
//! LCS, FDA and RVU each work on the 1-D ridge-valley signature of a
//! window rotated so the block's ridges run vertically.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::orientation::{angle_diff, BlockAnalysis, OrientationMap};
use super::signature::{autocorrelation_period, linear_fit, OrientedPatch};
use crate::error::{Error, Result};
use crate::raster::{FloatImage, ForegroundMask, GrayRaster};

/// Window extent across the ridges, in samples.
pub const WINDOW_ACROSS: usize = 32;
/// Window extent along the ridges, in pixels.
pub const WINDOW_ALONG: usize = 16;
pub const N_BINS: usize = 10;

/// Values of one feature family for every contributing block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockValues {
    pub family: &'static str,
    pub values: Vec<f64>,
}

impl BlockValues {
    pub fn mean_std(&self) -> Result<(f64, f64)> {
        self.non_empty()?;
        Ok(crate::filters::mean_std(&self.values))
    }

    fn non_empty(&self) -> Result<()> {
        if self.values.is_empty() {
            Err(Error::Feature { family: self.family, reason: "no contributing blocks".into() })
        } else {
            Ok(())
        }
    }
}

/// Relative frequencies over `n_bins` equal-width bins on `[0, 1]`; the last
/// bin is right-closed.
pub fn histogram_bins(values: &BlockValues, n_bins: usize) -> Result<Vec<f64>> {
    values.non_empty()?;
    let mut bins = vec![0.0; n_bins];
    for &v in &values.values {
        let idx = ((v.clamp(0.0, 1.0) * n_bins as f64).floor() as usize).min(n_bins - 1);
        bins[idx] += 1.0;
    }
    let n = values.values.len() as f64;
    bins.iter_mut().for_each(|b| *b /= n);
    Ok(bins)
}

pub fn ocl_blocks(blocks: &BlockAnalysis) -> BlockValues {
    BlockValues {
        family: "OCL",
        values: (0..blocks.grid.len()).filter(|&i| blocks.is_valid(i)).map(|i| blocks.tensors[i].ocl()).collect(),
    }
}

/// Clarity of one oriented window: columns are classified ridge/valley by
/// the regression line through the signature; every sample on the wrong
/// side of the line in its column counts as misclassified.
/// `1 − (α + β) / 2` with α, β the misclassified fractions of valley and
/// ridge samples.
pub fn local_clarity(patch: &OrientedPatch) -> f64 {
    let sig: Vec<f64> = patch.signature().into_iter().map(|v| v.unwrap_or(255.0)).collect();
    let (a, b) = linear_fit(&sig);
    let line: Vec<f64> = (0..sig.len()).map(|i| a + b * i as f64).collect();
    let ridge_col: Vec<bool> = sig.iter().zip(&line).map(|(s, t)| s < t).collect();
    if ridge_col.iter().all(|&r| r) || ridge_col.iter().all(|&r| !r) {
        return 0.0;
    }
    let (mut ridge_n, mut ridge_bad, mut valley_n, mut valley_bad) = (0usize, 0usize, 0usize, 0usize);
    for j in 0..patch.along {
        for i in 0..patch.across {
            let v = patch.get(i, j).unwrap_or(255.0);
            if ridge_col[i] {
                ridge_n += 1;
                ridge_bad += (v >= line[i]) as usize;
            } else {
                valley_n += 1;
                valley_bad += (v < line[i]) as usize;
            }
        }
    }
    let alpha = valley_bad as f64 / valley_n as f64;
    let beta = ridge_bad as f64 / ridge_n as f64;
    (1.0 - 0.5 * (alpha + beta)).clamp(0.0, 1.0)
}

/// Share of the non-DC spectral power held by the strongest bin (one-sided
/// spectrum, bins `1..=N/2`). Zero for a flat signature.
pub fn fda_from_signature(sig: &[f64], fft: &dyn Fft<f64>) -> f64 {
    let n = sig.len();
    let mean = sig.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = sig.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    fft.process(&mut buf);
    let power: Vec<f64> = buf[1..=n / 2].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total <= 1e-9 * n as f64 {
        return 0.0;
    }
    let peak = power.iter().copied().fold(0.0, f64::max);
    (peak / total).clamp(0.0, 1.0)
}

/// Ridge/valley width balance `exp(−|ln(ridge/valley)|)` from the
/// thresholded signature. Runs touching either end are truncated and
/// ignored; zero when no complete ridge or valley run remains.
pub fn rvu_from_signature(sig: &[f64]) -> f64 {
    let (a, b) = linear_fit(sig);
    let ridge: Vec<bool> = sig.iter().enumerate().map(|(i, &s)| s < a + b * i as f64).collect();
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &r in &ridge {
        match runs.last_mut() {
            Some((kind, len)) if *kind == r => *len += 1,
            _ => runs.push((r, 1)),
        }
    }
    if runs.len() < 3 {
        return 0.0;
    }
    let interior = &runs[1..runs.len() - 1];
    let mean_of = |kind: bool| {
        let w: Vec<usize> = interior.iter().filter(|r| r.0 == kind).map(|r| r.1).collect();
        (!w.is_empty()).then(|| w.iter().sum::<usize>() as f64 / w.len() as f64)
    };
    match (mean_of(true), mean_of(false)) {
        (Some(r), Some(v)) => (-(r / v).ln().abs()).exp(),
        _ => 0.0,
    }
}

/// Shared state for the signature-based families.
pub struct SignatureFamilies {
    fft: Arc<dyn Fft<f64>>,
    nominal_period: f64,
}

impl SignatureFamilies {
    pub fn new(nominal_period: f64) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(WINDOW_ACROSS);
        Self { fft, nominal_period }
    }

    fn window(&self, img: &FloatImage, center: (f64, f64), angle: f64, spacing: f64) -> OrientedPatch {
        OrientedPatch::sample(img, None, center.0, center.1, angle, WINDOW_ACROSS, WINDOW_ALONG, spacing)
    }

    pub fn clarity(&self, img: &FloatImage, center: (f64, f64), angle: f64) -> f64 {
        local_clarity(&self.window(img, center, angle, 1.0))
    }

    pub fn uniformity(&self, img: &FloatImage, center: (f64, f64), angle: f64) -> f64 {
        let sig: Vec<f64> =
            self.window(img, center, angle, 1.0).signature().into_iter().map(|v| v.unwrap_or(255.0)).collect();
        rvu_from_signature(&sig)
    }

    /// The window spans a whole number of local ridge periods so a clean
    /// pattern puts all its power into a single bin.
    pub fn frequency(&self, img: &FloatImage, center: (f64, f64), angle: f64) -> f64 {
        let wide = OrientedPatch::sample(img, None, center.0, center.1, angle, 48, WINDOW_ALONG, 1.0);
        let wide: Vec<f64> = wide.signature().into_iter().map(|v| v.unwrap_or(255.0)).collect();
        let period =
            autocorrelation_period(&wide, 0.3).filter(|p| (3.0..=24.0).contains(p)).unwrap_or(self.nominal_period);
        let cycles = (WINDOW_ACROSS as f64 / period).round().max(1.0);
        let spacing = cycles * period / WINDOW_ACROSS as f64;
        let sig: Vec<f64> =
            self.window(img, center, angle, spacing).signature().into_iter().map(|v| v.unwrap_or(255.0)).collect();
        fda_from_signature(&sig, self.fft.as_ref())
    }
}

/// Which signature family to evaluate per block.
#[derive(Clone, Copy, Debug)]
pub enum SignatureFamily {
    Clarity,
    Frequency,
    Uniformity,
}

pub fn signature_blocks(
    img: &FloatImage,
    blocks: &BlockAnalysis,
    orientation: &OrientationMap,
    families: &SignatureFamilies,
    which: SignatureFamily,
) -> BlockValues {
    let mut values = Vec::new();
    for row in 0..blocks.grid.rows {
        for col in 0..blocks.grid.cols {
            let Some(angle) = orientation.get(col, row) else {
                continue;
            };
            let c = blocks.grid.center(col, row);
            values.push(match which {
                SignatureFamily::Clarity => families.clarity(img, c, angle),
                SignatureFamily::Frequency => families.frequency(img, c, angle),
                SignatureFamily::Uniformity => families.uniformity(img, c, angle),
            });
        }
    }
    let family = match which {
        SignatureFamily::Clarity => "LCS",
        SignatureFamily::Frequency => "FDA",
        SignatureFamily::Uniformity => "RVU",
    };
    BlockValues { family, values }
}

pub fn local_clarity_blocks(
    sample: &GrayRaster,
    mask: &ForegroundMask,
    block_px: usize,
    orientation: &OrientationMap,
) -> Result<BlockValues> {
    let blocks = BlockAnalysis::new(sample, mask, block_px)?;
    let fam = SignatureFamilies::new(9.0);
    Ok(signature_blocks(&sample.to_float(), &blocks, orientation, &fam, SignatureFamily::Clarity))
}

pub fn fda_blocks(
    sample: &GrayRaster,
    mask: &ForegroundMask,
    block_px: usize,
    orientation: &OrientationMap,
) -> Result<BlockValues> {
    let blocks = BlockAnalysis::new(sample, mask, block_px)?;
    let fam = SignatureFamilies::new(9.0);
    Ok(signature_blocks(&sample.to_float(), &blocks, orientation, &fam, SignatureFamily::Frequency))
}

pub fn rvu_blocks(
    sample: &GrayRaster,
    mask: &ForegroundMask,
    block_px: usize,
    orientation: &OrientationMap,
) -> Result<BlockValues> {
    let blocks = BlockAnalysis::new(sample, mask, block_px)?;
    let fam = SignatureFamilies::new(9.0);
    Ok(signature_blocks(&sample.to_float(), &blocks, orientation, &fam, SignatureFamily::Uniformity))
}

/// Per valid block with at least one valid 8-neighbour:
/// `1 − mean|Δθ| / (π/2)`.
pub fn orientation_flow_blocks(omap: &OrientationMap) -> BlockValues {
    let (cols, rows) = (omap.grid.cols as isize, omap.grid.rows as isize);
    let mut values = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            let Some(a) = omap.get(col as usize, row as usize) else {
                continue;
            };
            let (mut sum, mut n) = (0.0, 0usize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (c, r) = (col + dx, row + dy);
                    if (dx, dy) == (0, 0) || c < 0 || r < 0 || c >= cols || r >= rows {
                        continue;
                    }
                    if let Some(b) = omap.get(c as usize, r as usize) {
                        sum += angle_diff(a, b);
                        n += 1;
                    }
                }
            }
            if n > 0 {
                values.push((1.0 - (sum / n as f64) / FRAC_PI_2).clamp(0.0, 1.0));
            }
        }
    }
    BlockValues { family: "OF", values }
}

/// `(MU, MMB, ROI Area Mean)`.
pub fn scalar_features(sample: &GrayRaster, mask: &ForegroundMask, block_px: usize) -> Result<(f64, f64, f64)> {
    let grid = super::orientation::BlockGrid::new(sample.width(), sample.height(), block_px)?;
    let coverage = grid.coverage(mask);
    let (mut fg_sum, mut fg_n) = (0.0, 0usize);
    for (&p, &m) in sample.pixels().iter().zip(mask.bits()) {
        if m {
            fg_sum += p as f64;
            fg_n += 1;
        }
    }
    let mut block_means = Vec::new();
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            if coverage[row * grid.cols + col] < super::orientation::MIN_BLOCK_COVERAGE {
                continue;
            }
            let (x0, y0) = grid.origin(col, row);
            let (mut s, mut n) = (0.0, 0usize);
            for y in y0..y0 + block_px {
                for x in x0..x0 + block_px {
                    if mask.get(x, y) {
                        s += sample.get(x, y) as f64;
                        n += 1;
                    }
                }
            }
            block_means.push(s / n as f64);
        }
    }
    if block_means.is_empty() || fg_n == 0 {
        return Err(Error::Feature { family: "scalar", reason: "no valid blocks".into() });
    }
    let mu = fg_sum / fg_n as f64;
    let mmb = block_means.iter().sum::<f64>() / block_means.len() as f64;
    let area = coverage.iter().sum::<f64>() / coverage.len() as f64;
    Ok((mu, mmb, area))
}
