//! Correlation matcher for synthetic self-match experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ForegroundMask, GrayRaster};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatcherConfig {
    /// Translation search radius around centroid alignment, px.
    pub max_shift: usize,
    /// Stride of the coarse search; the best coarse shift is refined at 1 px.
    pub coarse_step: usize,
    /// Shifts whose overlap is below this fraction of the smaller mask are
    /// skipped.
    pub min_overlap: f64,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self { max_shift: 12, coarse_step: 2, min_overlap: 0.25 }
    }
}

/// A sample prepared for repeated matching.
pub struct MatchTemplate {
    width: usize,
    height: usize,
    values: Vec<u8>,
    mask: Vec<bool>,
    /// Foreground pixel coordinates.
    fg: Vec<(u32, u32)>,
    centroid: (f64, f64),
}

impl MatchTemplate {
    pub fn new(img: &GrayRaster, mask: &ForegroundMask) -> Result<Self> {
        if !mask.matches(img) {
            return Err(Error::InvalidParam("mask dimensions differ from image".into()));
        }
        let w = img.width();
        let fg: Vec<(u32, u32)> =
            (0..img.pixels().len()).filter(|&i| mask.bits()[i]).map(|i| ((i % w) as u32, (i / w) as u32)).collect();
        if fg.is_empty() {
            return Err(Error::Metric("sample has an empty foreground mask".into()));
        }
        let n = fg.len() as f64;
        let centroid = (fg.iter().map(|p| p.0 as f64).sum::<f64>() / n, fg.iter().map(|p| p.1 as f64).sum::<f64>() / n);
        Ok(Self {
            width: w,
            height: img.height(),
            values: img.pixels().to_vec(),
            mask: mask.bits().to_vec(),
            fg,
            centroid,
        })
    }

    /// NCC over the overlap when `b`'s pixel `(x, y)` sits on `self`'s
    /// `(x + dx, y + dy)`; `None` below `min_count` overlapping pixels.
    fn ncc(&self, b: &MatchTemplate, dx: isize, dy: isize, min_count: usize) -> Option<f64> {
        let (mut n, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0usize, 0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y) in &b.fg {
            let (ax, ay) = (x as isize + dx, y as isize + dy);
            if ax < 0 || ay < 0 || ax >= self.width as isize || ay >= self.height as isize {
                continue;
            }
            let ia = ay as usize * self.width + ax as usize;
            if !self.mask[ia] {
                continue;
            }
            let va = self.values[ia] as f64;
            let vb = b.values[y as usize * b.width + x as usize] as f64;
            n += 1;
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
        }
        if n < min_count.max(2) {
            return None;
        }
        let nf = n as f64;
        let cov = sab - sa * sb / nf;
        let (va, vb) = (saa - sa * sa / nf, sbb - sb * sb / nf);
        if va <= 1e-9 || vb <= 1e-9 {
            return Some(0.0);
        }
        Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Maximum masked normalized cross-correlation over the search window,
/// mapped from `[-1, 1]` to `[0, 1]`.
pub fn toy_match(a: &MatchTemplate, b: &MatchTemplate, cfg: &MatcherConfig) -> Result<f64> {
    let base = ((a.centroid.0 - b.centroid.0).round() as isize, (a.centroid.1 - b.centroid.1).round() as isize);
    let min_count = (cfg.min_overlap * a.fg.len().min(b.fg.len()) as f64).ceil() as usize;
    let r = cfg.max_shift as isize;
    let step = cfg.coarse_step.max(1);
    let mut best: Option<(f64, isize, isize)> = None;
    let consider = |dx: isize, dy: isize, best: &mut Option<(f64, isize, isize)>| {
        if let Some(v) = a.ncc(b, base.0 + dx, base.1 + dy, min_count) {
            if best.is_none_or(|(bv, _, _)| v > bv) {
                *best = Some((v, dx, dy));
            }
        }
    };
    for dy in (-r..=r).step_by(step) {
        for dx in (-r..=r).step_by(step) {
            consider(dx, dy, &mut best);
        }
    }
    if let Some((_, cx, cy)) = best {
        let reach = step as isize - 1;
        for dy in (cy - reach).max(-r)..=(cy + reach).min(r) {
            for dx in (cx - reach).max(-r)..=(cx + reach).min(r) {
                consider(dx, dy, &mut best);
            }
        }
    }
    let (v, _, _) = best.ok_or_else(|| Error::Metric("masks do not overlap within the search window".into()))?;
    Ok((v + 1.0) / 2.0)
}

pub fn toy_matcher(
    a: &GrayRaster,
    mask_a: &ForegroundMask,
    b: &GrayRaster,
    mask_b: &ForegroundMask,
    cfg: &MatcherConfig,
) -> Result<f64> {
    toy_match(&MatchTemplate::new(a, mask_a)?, &MatchTemplate::new(b, mask_b)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::generate_base_pattern;

    #[test]
    fn identical_samples_score_one() {
        let p = generate_base_pattern(3);
        let s = toy_matcher(&p.image, &p.mask, &p.image, &p.mask, &MatcherConfig::default()).unwrap();
        assert!((s - 1.0).abs() <= 1e-6, "{s}");
    }

    #[test]
    fn shifted_copy_is_found() {
        let p = generate_base_pattern(4);
        let (w, h) = (p.image.width(), p.image.height());
        let shifted = GrayRaster::from_fn(w, h, |x, y| if x >= 5 { p.image.get(x - 5, y) } else { 255 }).unwrap();
        let mask = ForegroundMask::from_fn(w, h, |x, y| x >= 5 && p.mask.get(x - 5, y)).unwrap();
        // centroid alignment absorbs the shift up to clipping at the border
        let s = toy_matcher(&p.image, &p.mask, &shifted, &mask, &MatcherConfig::default()).unwrap();
        assert!(s > 0.99, "{s}");
    }

    #[test]
    fn independent_patterns_score_low() {
        let mut total = 0.0;
        for seed in 0..10 {
            let (a, b) = (generate_base_pattern(100 + seed), generate_base_pattern(200 + seed));
            total += toy_matcher(&a.image, &a.mask, &b.image, &b.mask, &MatcherConfig::default()).unwrap();
        }
        assert!(total / 10.0 <= 0.6, "mean {}", total / 10.0);
    }

    #[test]
    fn disjoint_masks_are_an_error() {
        let img = GrayRaster::filled(40, 40, 100).unwrap();
        let left = ForegroundMask::from_fn(40, 40, |x, _| x < 4).unwrap();
        let cfg = MatcherConfig { max_shift: 2, ..MatcherConfig::default() };
        let a = MatchTemplate::new(&img, &left).unwrap();
        let right = ForegroundMask::from_fn(40, 40, |x, _| x >= 36).unwrap();
        let b = MatchTemplate { centroid: a.centroid, ..MatchTemplate::new(&img, &right).unwrap() };
        assert!(toy_match(&a, &b, &cfg).is_err());
    }
}
