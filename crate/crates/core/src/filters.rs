//! Shared low-level filters: Gaussian smoothing, Sobel gradients,
//! bilinear resampling and rotation.

use crate::raster::{FloatImage, ForegroundMask, GrayRaster};

/// Normalized 1-D Gaussian kernel with radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable convolution with edge replication.
pub fn convolve_separable(img: &FloatImage, kx: &[f64], ky: &[f64]) -> FloatImage {
    let (w, h) = (img.width, img.height);
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;
    let mut tmp = FloatImage::zeros(w, h);
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in kx.iter().enumerate() {
                let sx = (x as isize + i as isize - rx).clamp(0, w as isize - 1) as usize;
                acc += kv * row[sx];
            }
            tmp.data[y * w + x] = acc;
        }
    }
    let mut out = FloatImage::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in ky.iter().enumerate() {
                let sy = (y as isize + i as isize - ry).clamp(0, h as isize - 1) as usize;
                acc += kv * tmp.data[sy * w + x];
            }
            out.data[y * w + x] = acc;
        }
    }
    out
}

pub fn gaussian_blur(img: &FloatImage, sigma: f64) -> FloatImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    convolve_separable(img, &k, &k)
}

pub fn gaussian_blur_gray(img: &GrayRaster, sigma: f64) -> GrayRaster {
    if sigma <= 0.0 {
        return img.clone();
    }
    gaussian_blur(&img.to_float(), sigma).to_gray()
}

/// Horizontal and vertical 3x3 Sobel responses (unnormalized, edges
/// replicated). `gy` is positive for intensity increasing downwards.
pub fn sobel(img: &FloatImage) -> (FloatImage, FloatImage) {
    let (w, h) = (img.width, img.height);
    let mut gx = FloatImage::zeros(w, h);
    let mut gy = FloatImage::zeros(w, h);
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let p = |xx: usize, yy: usize| img.data[yy * w + xx];
            let dx = (p(xp, ym) + 2.0 * p(xp, y) + p(xp, yp)) - (p(xm, ym) + 2.0 * p(xm, y) + p(xm, yp));
            let dy = (p(xm, yp) + 2.0 * p(x, yp) + p(xp, yp)) - (p(xm, ym) + 2.0 * p(x, ym) + p(xp, ym));
            gx.data[y * w + x] = dx;
            gy.data[y * w + x] = dy;
        }
    }
    (gx, gy)
}

/// Round half away from zero, as an output dimension (at least 1).
pub fn round_dim(v: f64) -> usize {
    (v.round() as usize).max(1)
}

/// Bilinear resize to exactly `new_w` x `new_h`; pixel centers are aligned
/// so an identity-sized resize reproduces the input.
pub fn resize_bilinear(img: &FloatImage, new_w: usize, new_h: usize) -> FloatImage {
    let sx = img.width as f64 / new_w as f64;
    let sy = img.height as f64 / new_h as f64;
    let mut out = FloatImage::zeros(new_w, new_h);
    for y in 0..new_h {
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..new_w {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            out.data[y * new_w + x] = img.sample(src_x, src_y);
        }
    }
    out
}

pub fn resize_gray(img: &GrayRaster, new_w: usize, new_h: usize) -> GrayRaster {
    if new_w == img.width() && new_h == img.height() {
        return img.clone();
    }
    resize_bilinear(&img.to_float(), new_w, new_h).to_gray()
}

/// Nearest-neighbour resize for masks.
pub fn resize_mask(mask: &ForegroundMask, new_w: usize, new_h: usize) -> ForegroundMask {
    if new_w == mask.width() && new_h == mask.height() {
        return mask.clone();
    }
    let sx = mask.width() as f64 / new_w as f64;
    let sy = mask.height() as f64 / new_h as f64;
    ForegroundMask::from_fn(new_w, new_h, |x, y| {
        let src_x = (((x as f64 + 0.5) * sx) as usize).min(mask.width() - 1);
        let src_y = (((y as f64 + 0.5) * sy) as usize).min(mask.height() - 1);
        mask.get(src_x, src_y)
    })
    .expect("nonzero dims")
}

/// Rotates by `angle_rad` (positive = clockwise on screen, since y points
/// down) about the image center into an `out_w` x `out_h` canvas whose
/// center coincides with the source center. Uncovered pixels get `fill`.
pub fn rotate_gray(img: &GrayRaster, angle_rad: f64, out_w: usize, out_h: usize, fill: u8) -> GrayRaster {
    let src = img.to_float();
    let (c, s) = (angle_rad.cos(), angle_rad.sin());
    let (scx, scy) = ((img.width() as f64 - 1.0) / 2.0, (img.height() as f64 - 1.0) / 2.0);
    let (dcx, dcy) = ((out_w as f64 - 1.0) / 2.0, (out_h as f64 - 1.0) / 2.0);
    let (w, h) = (img.width() as f64, img.height() as f64);
    GrayRaster::from_fn(out_w, out_h, |x, y| {
        let dx = x as f64 - dcx;
        let dy = y as f64 - dcy;
        // inverse rotation maps destination back into the source
        let sx = c * dx + s * dy + scx;
        let sy = -s * dx + c * dy + scy;
        if sx < -0.5 || sy < -0.5 || sx > w - 0.5 || sy > h - 0.5 {
            fill
        } else {
            crate::raster::clamp_u8(src.sample(sx, sy))
        }
    })
    .expect("nonzero dims")
}

pub fn rotate_mask(mask: &ForegroundMask, angle_rad: f64, out_w: usize, out_h: usize) -> ForegroundMask {
    let (c, s) = (angle_rad.cos(), angle_rad.sin());
    let (scx, scy) = ((mask.width() as f64 - 1.0) / 2.0, (mask.height() as f64 - 1.0) / 2.0);
    let (dcx, dcy) = ((out_w as f64 - 1.0) / 2.0, (out_h as f64 - 1.0) / 2.0);
    ForegroundMask::from_fn(out_w, out_h, |x, y| {
        let dx = x as f64 - dcx;
        let dy = y as f64 - dcy;
        let sx = (c * dx + s * dy + scx).round();
        let sy = (-s * dx + c * dy + scy).round();
        if sx < 0.0 || sy < 0.0 || sx >= mask.width() as f64 || sy >= mask.height() as f64 {
            false
        } else {
            mask.get(sx as usize, sy as usize)
        }
    })
    .expect("nonzero dims")
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.4);
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() / 2 {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn identity_resize_is_exact() {
        let img = GrayRaster::from_fn(9, 5, |x, y| (x * 20 + y) as u8).unwrap();
        let out = resize_bilinear(&img.to_float(), 9, 5).to_gray();
        assert_eq!(out, img);
    }

    #[test]
    fn sobel_on_ramp() {
        let img = GrayRaster::from_fn(5, 5, |x, _| (x * 10) as u8).unwrap().to_float();
        let (gx, gy) = sobel(&img);
        assert_eq!(gx.get(2, 2), 80.0);
        assert_eq!(gy.get(2, 2), 0.0);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let img = GrayRaster::from_fn(6, 4, |x, y| (x * 40 + y * 3) as u8).unwrap();
        assert_eq!(rotate_gray(&img, 0.0, 6, 4, 255), img);
    }
}
