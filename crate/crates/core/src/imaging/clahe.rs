//! Contrast-limited adaptive histogram equalization.

use crate::error::{Error, Result};
use crate::raster::GrayRaster;

/// Tile partition along one axis: `n` tiles of (almost) equal size.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TileAxis {
    extent: usize,
    n: usize,
}

impl TileAxis {
    pub(crate) fn new(extent: usize, tile_px: usize) -> Self {
        Self { extent, n: (extent / tile_px).max(1) }
    }

    pub(crate) fn count(&self) -> usize {
        self.n
    }

    pub(crate) fn bounds(&self, i: usize) -> (usize, usize) {
        (i * self.extent / self.n, (i + 1) * self.extent / self.n)
    }

    fn center(&self, i: usize) -> f64 {
        let (a, b) = self.bounds(i);
        (a + b) as f64 / 2.0
    }

    /// Neighbouring tile indices and the weight of the second one for a
    /// pixel whose center lies at `pos + 0.5`.
    fn interp(&self, pos: usize) -> (usize, usize, f64) {
        let p = pos as f64 + 0.5;
        if self.n == 1 || p <= self.center(0) {
            return (0, 0, 0.0);
        }
        let last = self.n - 1;
        if p >= self.center(last) {
            return (last, last, 0.0);
        }
        let mut i = 0;
        while p >= self.center(i + 1) {
            i += 1;
        }
        let (c0, c1) = (self.center(i), self.center(i + 1));
        (i, i + 1, (p - c0) / (c1 - c0))
    }
}

/// Equalization lookup table of one tile: clipped histogram, excess
/// redistributed uniformly, `lut[v] = round(255 * cdf(v) / area)`.
pub(crate) fn tile_lut(img: &GrayRaster, xs: (usize, usize), ys: (usize, usize), clip_limit: f64) -> [u8; 256] {
    let mut hist = [0f64; 256];
    for y in ys.0..ys.1 {
        let row = &img.pixels()[y * img.width()..(y + 1) * img.width()];
        for &p in &row[xs.0..xs.1] {
            hist[p as usize] += 1.0;
        }
    }
    let area = ((xs.1 - xs.0) * (ys.1 - ys.0)) as f64;
    if clip_limit.is_finite() {
        let clip = (clip_limit * area / 256.0).max(1.0);
        let mut excess = 0.0;
        for h in hist.iter_mut() {
            if *h > clip {
                excess += *h - clip;
                *h = clip;
            }
        }
        let share = excess / 256.0;
        hist.iter_mut().for_each(|h| *h += share);
    }
    let mut lut = [0u8; 256];
    let mut cdf = 0.0;
    for (v, h) in hist.iter().enumerate() {
        cdf += h;
        lut[v] = (255.0 * cdf / area).round().clamp(0.0, 255.0) as u8;
    }
    lut
}

/// One CLAHE pass with square tiles of side `tile_px` and bilinear
/// interpolation between neighbouring tile mappings. A tile larger than the
/// image degenerates to a single-tile (global, clipped) equalization.
/// `clip_limit` is relative to the mean bin height; `f64::INFINITY`
/// disables clipping.
pub fn clahe_pass(img: &GrayRaster, tile_px: usize, clip_limit: f64) -> Result<GrayRaster> {
    if tile_px < 2 {
        return Err(Error::InvalidParam(format!("CLAHE tile side must be >= 2, got {tile_px}")));
    }
    if clip_limit.is_nan() || clip_limit < 1.0 {
        return Err(Error::InvalidParam(format!("CLAHE clip limit must be >= 1.0, got {clip_limit}")));
    }
    let ax = TileAxis::new(img.width(), tile_px);
    let ay = TileAxis::new(img.height(), tile_px);
    let mut luts = Vec::with_capacity(ax.count() * ay.count());
    for ty in 0..ay.count() {
        for tx in 0..ax.count() {
            luts.push(tile_lut(img, ax.bounds(tx), ay.bounds(ty), clip_limit));
        }
    }
    let nx = ax.count();
    let xi: Vec<_> = (0..img.width()).map(|x| ax.interp(x)).collect();
    let mut out = img.clone();
    for y in 0..img.height() {
        let (y0, y1, wy) = ay.interp(y);
        for (x, &(x0, x1, wx)) in xi.iter().enumerate() {
            let v = img.get(x, y) as usize;
            let a = luts[y0 * nx + x0][v] as f64;
            let b = luts[y0 * nx + x1][v] as f64;
            let c = luts[y1 * nx + x0][v] as f64;
            let d = luts[y1 * nx + x1][v] as f64;
            let top = a + (b - a) * wx;
            let bottom = c + (d - c) * wx;
            out.set(x, y, (top + (bottom - top) * wy).round() as u8);
        }
    }
    Ok(out)
}

/// Applies `clahe_pass` for every `(tile_px, clip_limit)` in order.
pub fn enhance_iterative(img: &GrayRaster, schedule: &[(usize, f64)]) -> Result<GrayRaster> {
    if schedule.is_empty() {
        return Err(Error::InvalidParam("CLAHE schedule is empty".into()));
    }
    let mut cur = img.clone();
    for &(tile, clip) in schedule {
        cur = clahe_pass(&cur, tile, clip)?;
    }
    Ok(cur)
}
