//! Canny-based sharpness: the share of edge pixels inside a ring between
//! two nested ellipses, after scaling every image to a common width.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{gaussian_blur, resize_gray, round_dim, sobel};
use crate::raster::{ForegroundMask, GrayRaster};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SharpnessConfig {
    pub normalized_width: usize,
    /// Outer semi-axes as fractions of image width and height.
    pub outer_ellipse: (f64, f64),
    /// Inner semi-axes as a fraction of the outer ones.
    pub inner_ellipse: f64,
    pub canny_sigma: f64,
    /// Hysteresis thresholds as fractions of the largest gradient magnitude.
    pub canny_low: f64,
    pub canny_high: f64,
    /// `(raw_min, raw_max)` edge ratios mapped to 0 and 100.
    pub calibration: (f64, f64),
}

impl Default for SharpnessConfig {
    fn default() -> Self {
        Self {
            normalized_width: 400,
            outer_ellipse: (0.48, 0.48),
            inner_ellipse: 0.4,
            canny_sigma: 1.4,
            canny_low: 0.1,
            canny_high: 0.3,
            calibration: (0.0, DEFAULT_RAW_MAX),
        }
    }
}

/// Edge ratio of a noise-free rendered reference finger at the target
/// ridge period; fitted on the synthetic corpus.
pub const DEFAULT_RAW_MAX: f64 = 0.13;

impl SharpnessConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.normalized_width < 16 {
            return bad(format!("normalized_width must be >= 16, got {}", self.normalized_width));
        }
        if !(self.inner_ellipse > 0.0 && self.inner_ellipse < 1.0) {
            return bad(format!("inner_ellipse must lie in (0, 1), got {}", self.inner_ellipse));
        }
        let (a, b) = self.outer_ellipse;
        if !(a > 0.0 && b > 0.0) {
            return bad("outer_ellipse semi-axes must be positive".into());
        }
        if !(0.0 <= self.canny_low && self.canny_low < self.canny_high && self.canny_high <= 1.0) {
            return bad(format!(
                "canny thresholds need 0 <= low < high <= 1, got {} / {}",
                self.canny_low, self.canny_high
            ));
        }
        if self.canny_sigma < 0.0 {
            return bad("canny_sigma must be >= 0".into());
        }
        let (lo, hi) = self.calibration;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return bad(format!("calibration needs raw_min < raw_max, got ({lo}, {hi})"));
        }
        Ok(())
    }
}

/// Boolean edge pixels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub edges: Vec<bool>,
}

impl EdgeMap {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.edges[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }
}

/// Aspect-preserving bilinear resize to width `w`.
pub fn scale_to_width(img: &GrayRaster, w: usize) -> Result<GrayRaster> {
    if w < 16 {
        return Err(Error::InvalidParam(format!("target width must be >= 16, got {w}")));
    }
    if img.width() == w {
        return Ok(img.clone());
    }
    let h = round_dim(img.height() as f64 * w as f64 / img.width() as f64);
    Ok(resize_gray(img, w, h))
}

/// Pixels whose centre lies inside the outer ellipse and outside the inner
/// one, both centred on the image.
pub fn elliptical_mask(w: usize, h: usize, cfg: &SharpnessConfig) -> Result<ForegroundMask> {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let (a, b) = (cfg.outer_ellipse.0 * w as f64, cfg.outer_ellipse.1 * h as f64);
    let (ai, bi) = (a * cfg.inner_ellipse, b * cfg.inner_ellipse);
    ForegroundMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        let outer = (dx / a).powi(2) + (dy / b).powi(2) <= 1.0;
        let inner = (dx / ai).powi(2) + (dy / bi).powi(2) <= 1.0;
        outer && !inner
    })
}

/// Gaussian smoothing, Sobel gradients, non-maximum suppression along the
/// gradient direction quantized to 45°, then hysteresis with 8-connected
/// growth from strong pixels. The one-pixel image border never holds an
/// edge.
pub fn canny(img: &GrayRaster, cfg: &SharpnessConfig) -> EdgeMap {
    let (w, h) = (img.width(), img.height());
    let mut f = img.to_float();
    if cfg.canny_sigma > 0.0 {
        f = gaussian_blur(&f, cfg.canny_sigma);
    }
    let (gx, gy) = sobel(&f);
    let mag: Vec<f64> = gx.data.iter().zip(&gy.data).map(|(a, b)| a.hypot(*b)).collect();
    let max_mag = mag.iter().copied().fold(0.0, f64::max);
    let mut edges = vec![false; w * h];
    if max_mag <= 1e-9 || w < 3 || h < 3 {
        return EdgeMap { width: w, height: h, edges };
    }

    // 0: strong, 1: weak candidate, 2: nothing
    let (low, high) = (cfg.canny_low * max_mag, cfg.canny_high * max_mag);
    let mut class = vec![2u8; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m < low || m == 0.0 {
                continue;
            }
            let angle = gy.data[i].atan2(gx.data[i]).rem_euclid(PI);
            let sector = ((angle / (PI / 4.0)).round() as usize) % 4;
            let (dx, dy): (isize, isize) = match sector {
                0 => (1, 0),
                1 => (1, 1),
                2 => (0, 1),
                _ => (-1, 1),
            };
            let at = |sx: isize, sy: isize| mag[(y as isize + sy) as usize * w + (x as isize + sx) as usize];
            // ties go to the pixel further along the gradient
            if m > at(-dx, -dy) && m >= at(dx, dy) {
                class[i] = if m >= high { 0 } else { 1 };
            }
        }
    }

    let mut queue: VecDeque<usize> = (0..w * h).filter(|&i| class[i] == 0).collect();
    for &i in &queue {
        edges[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if class[j] == 1 && !edges[j] {
                    edges[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    EdgeMap { width: w, height: h, edges }
}

/// Raw edge ratio and the calibrated integer score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SharpnessScore {
    pub raw_ratio: f64,
    pub score: u8,
}

/// `round(100 · clamp((raw − raw_min) / (raw_max − raw_min), 0, 1))`.
pub fn calibrated_score(raw: f64, calibration: (f64, f64)) -> u8 {
    let (lo, hi) = calibration;
    let t = ((raw - lo) / (hi - lo)).clamp(0.0, 1.0);
    (100.0 * t).round() as u8
}

pub fn edge_ratio(img: &GrayRaster, cfg: &SharpnessConfig) -> Result<f64> {
    cfg.validate()?;
    let scaled = scale_to_width(img, cfg.normalized_width)?;
    let mask = elliptical_mask(scaled.width(), scaled.height(), cfg)?;
    let valid = mask.count();
    if valid == 0 {
        return Err(Error::InvalidParam("sharpness mask is empty".into()));
    }
    let edges = canny(&scaled, cfg);
    let hits = edges.edges.iter().zip(mask.bits()).filter(|(e, m)| **e && **m).count();
    Ok(hits as f64 / valid as f64)
}

pub fn ait_sharpness_detail(img: &GrayRaster, cfg: &SharpnessConfig) -> Result<SharpnessScore> {
    let raw_ratio = edge_ratio(img, cfg)?;
    Ok(SharpnessScore { raw_ratio, score: calibrated_score(raw_ratio, cfg.calibration) })
}

/// Integer sharpness in `[0, 100]`.
pub fn ait_sharpness(img: &GrayRaster, cfg: &SharpnessConfig) -> Result<u8> {
    Ok(ait_sharpness_detail(img, cfg)?.score)
}
