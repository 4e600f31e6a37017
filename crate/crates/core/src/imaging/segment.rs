//! Fallback foreground segmentation and moment-based upright rotation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{rotate_gray, rotate_mask};
use crate::raster::{ForegroundMask, GrayRaster};

pub const SEGMENT_BLOCK_PX: usize = 8;
/// A block is foreground when its variance exceeds this fraction of the
/// mean block variance. The mean over blocks, unlike the pixel variance,
/// ignores the contrast between a white backdrop and the finger.
pub const VARIANCE_FRACTION: f64 = 0.25;
pub const CLOSING_KERNEL: usize = 5;

/// Block-variance segmentation: threshold, keep the largest 4-connected
/// component of blocks, fill its holes, then close with a 5x5 square.
pub fn segment_foreground(img: &GrayRaster) -> Result<ForegroundMask> {
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let bw = w.div_ceil(SEGMENT_BLOCK_PX);
    let bh = h.div_ceil(SEGMENT_BLOCK_PX);
    let mut variances = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            let (x0, y0) = (bx * SEGMENT_BLOCK_PX, by * SEGMENT_BLOCK_PX);
            let (x1, y1) = ((x0 + SEGMENT_BLOCK_PX).min(w), (y0 + SEGMENT_BLOCK_PX).min(h));
            let (mut s, mut ss, mut k) = (0.0, 0.0, 0.0);
            for y in y0..y1 {
                for &p in &px[y * w + x0..y * w + x1] {
                    let v = p as f64;
                    s += v;
                    ss += v * v;
                    k += 1.0;
                }
            }
            variances.push((ss / k - (s / k) * (s / k)).max(0.0));
        }
    }
    let reference = variances.iter().sum::<f64>() / variances.len() as f64;
    if reference <= 0.0 {
        return Err(Error::Segmentation("image has no local variance".into()));
    }
    let blocks: Vec<bool> = variances.iter().map(|&v| v > VARIANCE_FRACTION * reference).collect();
    let blocks = largest_component(&blocks, bw, bh);
    if !blocks.iter().any(|&b| b) {
        return Err(Error::Segmentation("no textured foreground found".into()));
    }
    let blocks = fill_holes(&blocks, bw, bh);
    let mask = ForegroundMask::from_fn(w, h, |x, y| blocks[(y / SEGMENT_BLOCK_PX) * bw + x / SEGMENT_BLOCK_PX])?;
    Ok(close(&mask, CLOSING_KERNEL))
}

fn neighbours4(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [(x > 0).then(|| i - 1), (x + 1 < w).then(|| i + 1), (y > 0).then(|| i - w), (y + 1 < h).then(|| i + w)]
        .into_iter()
        .flatten()
}

/// Largest 4-connected component of `true` cells; ties keep the component
/// found first in raster order.
fn largest_component(cells: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut label = vec![usize::MAX; cells.len()];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..cells.len() {
        if !cells[start] || label[start] != usize::MAX {
            continue;
        }
        let mut comp = vec![start];
        label[start] = start;
        let mut q = VecDeque::from([start]);
        while let Some(i) = q.pop_front() {
            for j in neighbours4(i, w, h) {
                if cells[j] && label[j] == usize::MAX {
                    label[j] = start;
                    comp.push(j);
                    q.push_back(j);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let mut out = vec![false; cells.len()];
    best.into_iter().for_each(|i| out[i] = true);
    out
}

/// Background regions not connected to the border become foreground.
fn fill_holes(cells: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut outside = vec![false; cells.len()];
    let mut q = VecDeque::new();
    for i in 0..cells.len() {
        let (x, y) = (i % w, i / w);
        if !cells[i] && (x == 0 || y == 0 || x == w - 1 || y == h - 1) {
            outside[i] = true;
            q.push_back(i);
        }
    }
    while let Some(i) = q.pop_front() {
        for j in neighbours4(i, w, h) {
            if !cells[j] && !outside[j] {
                outside[j] = true;
                q.push_back(j);
            }
        }
    }
    outside.iter().map(|&o| !o).collect()
}

/// Square-kernel morphology along one axis; `max` selects dilation.
fn sweep(bits: &[bool], w: usize, h: usize, r: usize, horizontal: bool, dilate: bool) -> Vec<bool> {
    let mut out = vec![false; bits.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = !dilate;
            for d in 0..=2 * r {
                let off = d as isize - r as isize;
                let (xx, yy) = if horizontal { (x as isize + off, y as isize) } else { (x as isize, y as isize + off) };
                let v = if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                    // outside counts as background for dilation and as
                    // foreground for erosion, so closing never eats the border
                    !dilate
                } else {
                    bits[yy as usize * w + xx as usize]
                };
                if dilate {
                    acc |= v;
                } else {
                    acc &= v;
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Morphological closing with a `k x k` square.
pub fn close(mask: &ForegroundMask, k: usize) -> ForegroundMask {
    let (w, h) = (mask.width(), mask.height());
    let r = k / 2;
    let d = sweep(mask.bits(), w, h, r, true, true);
    let d = sweep(&d, w, h, r, false, true);
    let e = sweep(&d, w, h, r, true, false);
    let e = sweep(&e, w, h, r, false, false);
    ForegroundMask::new(w, h, e).expect("same dims")
}

/// Principal-axis analysis of a mask.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskAxis {
    /// Tilt of the major axis from vertical in degrees, in `(-90, 90]`;
    /// positive when the top leans to the right.
    pub tilt_deg: f64,
    /// `sqrt(λmax / λmin)` of the second central moments.
    pub axis_ratio: f64,
}

pub const MIN_AXIS_RATIO: f64 = 1.05;

pub fn mask_axis(mask: &ForegroundMask) -> Result<MaskAxis> {
    let (mut n, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                n += 1.0;
                sx += x as f64;
                sy += y as f64;
            }
        }
    }
    if n == 0.0 {
        return Err(Error::Segmentation("empty mask".into()));
    }
    let (cx, cy) = (sx / n, sy / n);
    let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                m20 += dx * dx;
                m02 += dy * dy;
                m11 += dx * dy;
            }
        }
    }
    let (m20, m02, m11) = (m20 / n, m02 / n, m11 / n);
    let theta = 0.5 * (2.0 * m11).atan2(m20 - m02);
    let mean = 0.5 * (m20 + m02);
    let r = (0.25 * (m20 - m02).powi(2) + m11 * m11).sqrt();
    let (l1, l2) = (mean + r, (mean - r).max(1e-12));
    let mut tilt = (theta + std::f64::consts::FRAC_PI_2).to_degrees();
    while tilt > 90.0 {
        tilt -= 180.0;
    }
    while tilt <= -90.0 {
        tilt += 180.0;
    }
    Ok(MaskAxis { tilt_deg: tilt, axis_ratio: (l1 / l2).sqrt() })
}

#[derive(Clone, Debug)]
pub struct Rotated {
    pub image: GrayRaster,
    pub mask: ForegroundMask,
    /// Tilt that was removed, in degrees.
    pub angle_deg: f64,
    /// Set when the mask was too round to define an axis.
    pub degenerate: bool,
}

/// Rotates image and mask so the mask's major axis is vertical. The canvas
/// grows to hold the whole rotated image; new area is white background.
pub fn rotate_upright(img: &GrayRaster, mask: &ForegroundMask) -> Result<Rotated> {
    if !mask.matches(img) {
        return Err(Error::InvalidParam("mask dimensions differ from image".into()));
    }
    let axis = mask_axis(mask)?;
    if axis.axis_ratio < MIN_AXIS_RATIO || axis.tilt_deg == 0.0 {
        return Ok(Rotated {
            image: img.clone(),
            mask: mask.clone(),
            angle_deg: 0.0,
            degenerate: axis.axis_ratio < MIN_AXIS_RATIO,
        });
    }
    let a = -axis.tilt_deg.to_radians();
    let (w, h) = (img.width() as f64, img.height() as f64);
    let ow = (w * a.cos().abs() + h * a.sin().abs()).ceil() as usize;
    let oh = (w * a.sin().abs() + h * a.cos().abs()).ceil() as usize;
    let mut image = rotate_gray(img, a, ow, oh, 255);
    let mask = rotate_mask(mask, a, ow, oh);
    image.whiten_background(&mask);
    Ok(Rotated { image, mask, angle_deg: axis.tilt_deg, degenerate: false })
}
