//! Seeded fingerprint-like ridge patterns.
//!
//! A smooth orientation field (a constant plus three low-order harmonics of
//! random phase) steers an even Gabor filter that is applied repeatedly to
//! seeded noise; after a few passes the noise organizes into ridges of the
//! filter's period that follow the field.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{clamp_u8, FloatImage, ForegroundMask, GrayRaster};

pub const PATTERN_WIDTH: usize = 176;
pub const PATTERN_HEIGHT: usize = 224;
/// Range of the rendered ridge period, px.
pub const PERIOD_RANGE: (f64, f64) = (8.0, 10.5);
const ORIENTATION_BINS: usize = 16;
const GABOR_RADIUS: isize = 6;
const GABOR_SIGMA: f64 = 2.6;
const PASSES: usize = 4;
/// Rendered gray levels are `MID ∓ AMPLITUDE` for ridge / valley.
const MID: f64 = 128.0;
const AMPLITUDE: f64 = 80.0;

/// Low-order harmonic orientation field.
#[derive(Clone, Debug)]
pub struct OrientationField {
    base: f64,
    terms: [(f64, f64, f64, f64); 3],
}

impl OrientationField {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let base = rng.random_range(0.0..PI);
        let mut terms = [(0.0, 0.0, 0.0, 0.0); 3];
        for t in &mut terms {
            // amplitude, x and y spatial frequency (cycles per image), phase
            *t = (
                rng.random_range(0.15..0.45),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..TAU),
            );
        }
        Self { base, terms }
    }

    /// Ridge angle at normalized coordinates `(u, v) ∈ [0, 1]²`.
    pub fn angle(&self, u: f64, v: f64) -> f64 {
        let wobble: f64 = self.terms.iter().map(|(a, fx, fy, p)| a * (TAU * (fx * u + fy * v) + p).sin()).sum();
        (self.base + wobble).rem_euclid(PI)
    }
}

/// Zero-mean even Gabor kernel whose cosine runs across ridges at
/// `ridge_angle`.
fn gabor_kernel(ridge_angle: f64, period: f64) -> Vec<f64> {
    let side = (2 * GABOR_RADIUS + 1) as usize;
    let (nx, ny) = (-ridge_angle.sin(), ridge_angle.cos());
    let mut k = Vec::with_capacity(side * side);
    for dy in -GABOR_RADIUS..=GABOR_RADIUS {
        for dx in -GABOR_RADIUS..=GABOR_RADIUS {
            let (x, y) = (dx as f64, dy as f64);
            let env = (-(x * x + y * y) / (2.0 * GABOR_SIGMA * GABOR_SIGMA)).exp();
            k.push(env * (TAU * (x * nx + y * ny) / period).cos());
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    k
}

/// Renders a pattern with the given field and period; ridges are dark.
pub fn render_ridges(
    width: usize,
    height: usize,
    field: &OrientationField,
    period: f64,
    rng: &mut ChaCha8Rng,
) -> FloatImage {
    let kernels: Vec<Vec<f64>> =
        (0..ORIENTATION_BINS).map(|b| gabor_kernel(b as f64 * PI / ORIENTATION_BINS as f64, period)).collect();
    let bins: Vec<usize> = (0..width * height)
        .map(|i| {
            let (x, y) = (i % width, i / width);
            let a = field.angle(x as f64 / width as f64, y as f64 / height as f64);
            ((a / PI * ORIENTATION_BINS as f64).round() as usize) % ORIENTATION_BINS
        })
        .collect();
    let mut img =
        FloatImage { width, height, data: (0..width * height).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let side = (2 * GABOR_RADIUS + 1) as usize;
    let r = GABOR_RADIUS as usize;
    let pw = width + 2 * r;
    for _ in 0..PASSES {
        // edge-replicated copy so every tap is an in-bounds slice read
        let padded: Vec<f64> = (0..(height + 2 * r) * pw)
            .map(|i| img.get_clamped((i % pw) as isize - GABOR_RADIUS, (i / pw) as isize - GABOR_RADIUS))
            .collect();
        let mut out = FloatImage::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let k = &kernels[bins[y * width + x]];
                let mut acc = 0.0;
                for ky in 0..side {
                    let row = &k[ky * side..(ky + 1) * side];
                    let src = &padded[(y + ky) * pw + x..(y + ky) * pw + x + side];
                    acc += row.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                }
                out.data[y * width + x] = acc;
            }
        }
        let rms = (out.data.iter().map(|v| v * v).sum::<f64>() / out.data.len() as f64).sqrt().max(1e-12);
        out.data.iter_mut().for_each(|v| *v = (1.5 * *v / rms).tanh());
        img = out;
    }
    img
}

/// A rendered finger: gray pattern on white and its elliptical foreground.
#[derive(Clone, Debug)]
pub struct BasePattern {
    pub image: GrayRaster,
    pub mask: ForegroundMask,
    pub period: f64,
}

/// Elliptical fingertip mask with seeded semi-axes and centre offset.
fn finger_mask(width: usize, height: usize, rng: &mut ChaCha8Rng) -> ForegroundMask {
    let a = width as f64 * rng.random_range(0.40..0.46);
    let b = height as f64 * rng.random_range(0.42..0.47);
    let cx = width as f64 / 2.0 + rng.random_range(-3.0..3.0);
    let cy = height as f64 / 2.0 + rng.random_range(-3.0..3.0);
    ForegroundMask::from_fn(width, height, |x, y| {
        let (dx, dy) = ((x as f64 + 0.5 - cx) / a, (y as f64 + 0.5 - cy) / b);
        dx * dx + dy * dy <= 1.0
    })
    .expect("non-empty canvas")
}

pub fn generate_base_pattern(seed: u64) -> BasePattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = rng.random_range(PERIOD_RANGE.0..PERIOD_RANGE.1);
    let field = OrientationField::random(&mut rng);
    let mask = finger_mask(PATTERN_WIDTH, PATTERN_HEIGHT, &mut rng);
    let ridges = render_ridges(PATTERN_WIDTH, PATTERN_HEIGHT, &field, period, &mut rng);
    let image = GrayRaster::from_fn(PATTERN_WIDTH, PATTERN_HEIGHT, |x, y| {
        if mask.get(x, y) {
            clamp_u8(MID - AMPLITUDE * ridges.get(x, y))
        } else {
            255
        }
    })
    .expect("non-empty canvas");
    BasePattern { image, mask, period }
}
