use crate::error::Result;
use crate::raster::{GrayRaster, RgbRaster};

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Per-pixel luma, rounded half away from zero. Gray pixels (`r == g == b`)
/// map to themselves exactly.
pub fn to_grayscale(rgb: &RgbRaster) -> Result<GrayRaster> {
    let px = rgb
        .data()
        .chunks_exact(3)
        .map(|c| {
            if c[0] == c[1] && c[1] == c[2] {
                return c[0];
            }
            let v = LUMA_WEIGHTS[0] * c[0] as f64 + LUMA_WEIGHTS[1] * c[1] as f64 + LUMA_WEIGHTS[2] * c[2] as f64;
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayRaster::new(rgb.width(), rgb.height(), px)
}
