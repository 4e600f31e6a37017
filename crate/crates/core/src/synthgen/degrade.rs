//! Quality-controlled degradations of a rendered finger.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{gaussian_blur, rotate_gray, rotate_mask};
use crate::raster::{clamp_u8, FloatImage, ForegroundMask, GrayRaster};

/// Degradation strengths. `seed` drives the stochastic parts (noise,
/// dirt placement, gradient and motion directions).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    pub blur_sigma: f64,
    pub motion_len: f64,
    pub noise_sigma: f64,
    pub contrast_scale: f64,
    pub illumination_gradient: f64,
    pub rotation_jitter: f64,
    pub dirt_density: f64,
    pub seed: u64,
}

/// `(value at c = 100, value at c = 0)` for every field.
pub const BLUR_SIGMA_RANGE: (f64, f64) = (0.0, 1.6);
pub const MOTION_LEN_RANGE: (f64, f64) = (0.0, 5.0);
pub const NOISE_SIGMA_RANGE: (f64, f64) = (0.0, 24.0);
pub const CONTRAST_SCALE_RANGE: (f64, f64) = (1.0, 0.45);
pub const ILLUMINATION_GRADIENT_RANGE: (f64, f64) = (0.0, 0.4);
pub const ROTATION_JITTER_RANGE: (f64, f64) = (0.0, 8.0);
pub const DIRT_DENSITY_RANGE: (f64, f64) = (0.0, 0.5);
/// Jitter half-width at mid severity, as a fraction of the field's range.
pub const JITTER_FRACTION: f64 = 0.15;

impl DegradationParams {
    /// Leaves the input untouched.
    pub fn identity() -> Self {
        Self {
            blur_sigma: 0.0,
            motion_len: 0.0,
            noise_sigma: 0.0,
            contrast_scale: 1.0,
            illumination_gradient: 0.0,
            rotation_jitter: 0.0,
            dirt_density: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.blur_sigma,
            self.motion_len,
            self.noise_sigma,
            self.illumination_gradient,
            self.rotation_jitter,
            self.dirt_density,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParam("degradation strengths must be finite and >= 0".into()));
        }
        if !(self.contrast_scale > 0.0 && self.contrast_scale <= 1.0) {
            return Err(Error::InvalidParam(format!("contrast_scale must lie in (0, 1], got {}", self.contrast_scale)));
        }
        if self.dirt_density > 1.0 {
            return Err(Error::InvalidParam("dirt_density must be <= 1".into()));
        }
        Ok(())
    }
}

/// `(c, severity)` knots of the piecewise-linear quality map. The steep
/// middle segment separates the low (c ≤ 33) and high (c ≥ 66) presets.
pub const SEVERITY_KNOTS: [(f64, f64); 4] = [(0.0, 1.0), (33.0, 0.8), (66.0, 0.2), (100.0, 0.0)];

/// Severity in `[0, 1]` for quality parameter `c`; strictly decreasing.
pub fn severity(c: f64) -> f64 {
    let k = &SEVERITY_KNOTS;
    let i = k.windows(2).position(|w| c <= w[1].0).unwrap_or(k.len() - 2);
    let ((c0, s0), (c1, s1)) = (k[i], k[i + 1]);
    s0 + (c - c0) / (c1 - c0) * (s1 - s0)
}

/// Every field moves linearly with `severity(c)` from its c = 100 end to
/// its c = 0 end. Each field is jittered uniformly by
/// `± JITTER_FRACTION · 4s(1 − s) · |range|` and clamped to its range, so
/// the endpoints are exact.
pub fn params_from_quality(c: f64, seed: u64) -> Result<DegradationParams> {
    if !(0.0..=100.0).contains(&c) {
        return Err(Error::InvalidParam(format!("quality parameter must lie in [0, 100], got {c}")));
    }
    let s = severity(c);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = JITTER_FRACTION * 4.0 * s * (1.0 - s);
    let mut draw = |(best, worst): (f64, f64)| {
        let mid = best + s * (worst - best);
        let j = if width > 0.0 { rng.random_range(-width..=width) } else { 0.0 };
        let (lo, hi) = if best <= worst { (best, worst) } else { (worst, best) };
        (mid + j * (worst - best)).clamp(lo, hi)
    };
    Ok(DegradationParams {
        blur_sigma: draw(BLUR_SIGMA_RANGE),
        motion_len: draw(MOTION_LEN_RANGE),
        noise_sigma: draw(NOISE_SIGMA_RANGE),
        contrast_scale: draw(CONTRAST_SCALE_RANGE),
        illumination_gradient: draw(ILLUMINATION_GRADIENT_RANGE),
        rotation_jitter: draw(ROTATION_JITTER_RANGE),
        dirt_density: draw(DIRT_DENSITY_RANGE),
        seed: rng.random(),
    })
}

/// Mean over `len` bilinear samples spaced 1 px along `angle`.
fn motion_blur(img: &FloatImage, len: f64, angle: f64) -> FloatImage {
    let taps = len.round() as usize;
    if taps < 2 {
        return img.clone();
    }
    let (dx, dy) = (angle.cos(), angle.sin());
    let half = (taps as f64 - 1.0) / 2.0;
    let mut out = FloatImage::zeros(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let mut acc = 0.0;
            for t in 0..taps {
                let o = t as f64 - half;
                acc += img.sample(x as f64 + o * dx, y as f64 + o * dy);
            }
            out.data[y * img.width + x] = acc / taps as f64;
        }
    }
    out
}

/// Contrast compression, illumination gradient, Gaussian blur, motion
/// blur, additive noise, dirt, rotation jitter. Operations act on the
/// foreground; the background stays white.
pub fn degrade(img: &GrayRaster, mask: &ForegroundMask, p: &DegradationParams) -> Result<GrayRaster> {
    p.validate()?;
    if !mask.matches(img) {
        return Err(Error::InvalidParam("mask dimensions differ from image".into()));
    }
    let (w, h) = (img.width(), img.height());
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut f = img.to_float();
    let fg: Vec<usize> = (0..w * h).filter(|&i| mask.bits()[i]).collect();
    if fg.is_empty() {
        return Ok(img.clone());
    }

    if p.contrast_scale < 1.0 {
        let mean = fg.iter().map(|&i| f.data[i]).sum::<f64>() / fg.len() as f64;
        for &i in &fg {
            f.data[i] = mean + p.contrast_scale * (f.data[i] - mean);
        }
    }
    if p.illumination_gradient > 0.0 {
        let dir = rng.random_range(0.0..std::f64::consts::TAU);
        let (gx, gy) = (dir.cos(), dir.sin());
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        for &i in &fg {
            let (x, y) = ((i % w) as f64 - cx, (i / w) as f64 - cy);
            f.data[i] += p.illumination_gradient * (x * gx + y * gy);
        }
    }
    if p.blur_sigma > 0.0 || p.motion_len >= 2.0 {
        if p.blur_sigma > 0.0 {
            f = gaussian_blur(&f, p.blur_sigma);
        }
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        f = motion_blur(&f, p.motion_len, angle);
    }
    if p.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, p.noise_sigma).expect("positive sigma");
        for &i in &fg {
            f.data[i] += normal.sample(&mut rng);
        }
    }
    if p.dirt_density > 0.0 {
        // one blob per 400 px of foreground at density 1
        let blobs = (p.dirt_density * fg.len() as f64 / 400.0).round() as usize;
        for _ in 0..blobs {
            let centre = fg[rng.random_range(0..fg.len())];
            let (bx, by) = ((centre % w) as f64, (centre / w) as f64);
            let r: f64 = rng.random_range(1.5..4.5);
            let tone: f64 = rng.random_range(10.0..70.0);
            let reach = r.ceil() as isize + 1;
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let (x, y) = (bx as isize + dx, by as isize + dy);
                    if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                        continue;
                    }
                    let d = ((dx * dx + dy * dy) as f64).sqrt();
                    let a = (r + 0.5 - d).clamp(0.0, 1.0);
                    let i = y as usize * w + x as usize;
                    if a > 0.0 && mask.bits()[i] {
                        f.data[i] = (1.0 - a) * f.data[i] + a * tone;
                    }
                }
            }
        }
    }
    for (i, v) in f.data.iter_mut().enumerate() {
        if !mask.bits()[i] {
            *v = 255.0;
        }
    }
    let mut out = GrayRaster::new(w, h, f.data.iter().map(|&v| clamp_u8(v)).collect())?;
    if p.rotation_jitter > 0.0 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let angle = (sign * p.rotation_jitter).to_radians();
        let rotated_mask = rotate_mask(mask, angle, w, h);
        out = rotate_gray(&out, angle, w, h, 255);
        out.whiten_background(&rotated_mask);
    }
    Ok(out)
}
