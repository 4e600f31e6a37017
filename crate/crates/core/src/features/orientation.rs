//! Block grid, gradient structure tensor, orientation and coherence maps.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::filters::sobel;
use crate::raster::{FloatImage, ForegroundMask, GrayRaster};

/// Minimum fraction of foreground pixels for a block to be valid.
pub const MIN_BLOCK_COVERAGE: f64 = 0.5;

/// Non-overlapping square blocks anchored at the image origin; partial
/// blocks at the right/bottom edges are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockGrid {
    pub block_px: usize,
    pub cols: usize,
    pub rows: usize,
}

impl BlockGrid {
    pub fn new(width: usize, height: usize, block_px: usize) -> Result<Self> {
        if block_px < 8 {
            return Err(Error::InvalidParam(format!("block size must be >= 8 px, got {block_px}")));
        }
        Ok(Self { block_px, cols: width / block_px, rows: height / block_px })
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self, col: usize, row: usize) -> (usize, usize) {
        (col * self.block_px, row * self.block_px)
    }

    pub fn center(&self, col: usize, row: usize) -> (f64, f64) {
        let (x, y) = self.origin(col, row);
        let half = (self.block_px as f64 - 1.0) / 2.0;
        (x as f64 + half, y as f64 + half)
    }

    /// Fraction of foreground pixels in each block.
    pub fn coverage(&self, mask: &ForegroundMask) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let area = (self.block_px * self.block_px) as f64;
        for row in 0..self.rows {
            for col in 0..self.cols {
                let (x0, y0) = self.origin(col, row);
                let mut n = 0usize;
                for y in y0..y0 + self.block_px {
                    for x in x0..x0 + self.block_px {
                        n += mask.get(x, y) as usize;
                    }
                }
                out.push(n as f64 / area);
            }
        }
        out
    }
}

/// Sums of gradient products over a block.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockTensor {
    pub gxx: f64,
    pub gyy: f64,
    pub gxy: f64,
    pub n: usize,
}

impl BlockTensor {
    pub fn energy(&self) -> f64 {
        self.gxx + self.gyy
    }

    /// Ridge orientation in `[0, π)`: the dominant gradient direction
    /// rotated by a quarter turn. Angles are measured from +x towards +y
    /// (image rows grow downwards).
    pub fn ridge_angle(&self) -> f64 {
        let grad = 0.5 * (2.0 * self.gxy).atan2(self.gxx - self.gyy);
        wrap_pi(grad + PI / 2.0)
    }

    /// `|Σ(Gx²−Gy², 2GxGy)| / Σ(Gx²+Gy²)`, zero when there is no energy.
    pub fn coherence(&self) -> f64 {
        let e = self.energy();
        if e <= 0.0 {
            return 0.0;
        }
        let d = self.gxx - self.gyy;
        ((d * d + 4.0 * self.gxy * self.gxy).sqrt() / e).clamp(0.0, 1.0)
    }

    /// Eigenvalues `(λ1, λ2)`, `λ1 >= λ2 >= 0`, of the gradient covariance
    /// matrix `[[Gxx, Gxy], [Gxy, Gyy]] / n`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        if self.n == 0 {
            return (0.0, 0.0);
        }
        let n = self.n as f64;
        let (a, b, c) = (self.gxx / n, self.gyy / n, self.gxy / n);
        let mean = 0.5 * (a + b);
        let r = (0.25 * (a - b) * (a - b) + c * c).sqrt();
        ((mean + r).max(0.0), (mean - r).max(0.0))
    }

    /// Orientation certainty level `1 − λ2/λ1`, zero when `λ1 = 0`.
    pub fn ocl(&self) -> f64 {
        let (l1, l2) = self.eigenvalues();
        if l1 <= 0.0 {
            0.0
        } else {
            (1.0 - l2 / l1).clamp(0.0, 1.0)
        }
    }
}

pub fn wrap_pi(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Absolute difference of two orientations modulo π, folded to `[0, π/2]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Sobel gradients plus the set of pixels whose whole 3x3 neighbourhood is
/// foreground (gradients elsewhere see the background edge).
#[derive(Clone, Debug)]
pub struct GradientField {
    pub gx: FloatImage,
    pub gy: FloatImage,
    pub usable: Vec<bool>,
}

impl GradientField {
    pub fn new(img: &FloatImage, mask: &ForegroundMask) -> Self {
        let (gx, gy) = sobel(img);
        let (w, h) = (img.width, img.height);
        let mut usable = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut ok = true;
                'n: for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        if !mask.get(xx, yy) {
                            ok = false;
                            break 'n;
                        }
                    }
                }
                usable[y * w + x] = ok;
            }
        }
        Self { gx, gy, usable }
    }

    pub fn tensor(&self, x0: usize, y0: usize, size: usize) -> BlockTensor {
        let w = self.gx.width;
        let mut t = BlockTensor::default();
        for y in y0..(y0 + size).min(self.gx.height) {
            for x in x0..(x0 + size).min(w) {
                let i = y * w + x;
                if !self.usable[i] {
                    continue;
                }
                let (gx, gy) = (self.gx.data[i], self.gy.data[i]);
                t.gxx += gx * gx;
                t.gyy += gy * gy;
                t.gxy += gx * gy;
                t.n += 1;
            }
        }
        t
    }
}

/// Per-block structure tensors and validity over a block grid.
#[derive(Clone, Debug)]
pub struct BlockAnalysis {
    pub grid: BlockGrid,
    pub coverage: Vec<f64>,
    pub tensors: Vec<BlockTensor>,
}

impl BlockAnalysis {
    pub fn new(sample: &GrayRaster, mask: &ForegroundMask, block_px: usize) -> Result<Self> {
        let img = sample.to_float();
        let field = GradientField::new(&img, mask);
        Self::from_field(&field, mask, block_px)
    }

    pub fn from_field(field: &GradientField, mask: &ForegroundMask, block_px: usize) -> Result<Self> {
        let grid = BlockGrid::new(mask.width(), mask.height(), block_px)?;
        let coverage = grid.coverage(mask);
        let mut tensors = Vec::with_capacity(grid.len());
        for row in 0..grid.rows {
            for col in 0..grid.cols {
                let (x0, y0) = grid.origin(col, row);
                tensors.push(field.tensor(x0, y0, block_px));
            }
        }
        Ok(Self { grid, coverage, tensors })
    }

    pub fn is_covered(&self, i: usize) -> bool {
        self.coverage[i] >= MIN_BLOCK_COVERAGE
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.is_covered(i) && self.tensors[i].energy() > 0.0
    }

    pub fn orientation_map(&self) -> OrientationMap {
        OrientationMap {
            grid: self.grid,
            angles: (0..self.grid.len()).map(|i| self.is_valid(i).then(|| self.tensors[i].ridge_angle())).collect(),
        }
    }

    pub fn coherence_map(&self) -> CoherenceMap {
        CoherenceMap {
            grid: self.grid,
            values: (0..self.grid.len()).map(|i| self.is_valid(i).then(|| self.tensors[i].coherence())).collect(),
        }
    }
}

/// Block ridge orientations; `None` marks invalid blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationMap {
    pub grid: BlockGrid,
    pub angles: Vec<Option<f64>>,
}

impl OrientationMap {
    pub fn get(&self, col: usize, row: usize) -> Option<f64> {
        self.angles[row * self.grid.cols + col]
    }

    pub fn valid_count(&self) -> usize {
        self.angles.iter().filter(|a| a.is_some()).count()
    }
}

/// Block coherence values in `[0, 1]`; `None` marks invalid blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceMap {
    pub grid: BlockGrid,
    pub values: Vec<Option<f64>>,
}

pub fn orientation_field(sample: &GrayRaster, mask: &ForegroundMask, block_px: usize) -> Result<OrientationMap> {
    Ok(BlockAnalysis::new(sample, mask, block_px)?.orientation_map())
}

pub fn coherence_map(sample: &GrayRaster, mask: &ForegroundMask, block_px: usize) -> Result<CoherenceMap> {
    Ok(BlockAnalysis::new(sample, mask, block_px)?.coherence_map())
}

/// `(Σ c, Σ c / valid count)` over valid blocks.
pub fn coherence_sums(cmap: &CoherenceMap) -> Result<(f64, f64)> {
    let vals: Vec<f64> = cmap.values.iter().flatten().copied().collect();
    if vals.is_empty() {
        return Err(Error::Feature { family: "coherence", reason: "no valid blocks".into() });
    }
    let sum: f64 = vals.iter().sum();
    Ok((sum, sum / vals.len() as f64))
}
