//! Raster types and file I/O.
//!
//! Binary PGM (`P5`, maxval 255) is the interchange format for samples and
//! masks. PNG is accepted on input (and converted to gray when it carries
//! color).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayRaster {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(Error::Dimension {
                width,
                height,
                reason: format!("expected {} pixels, got {}", width * height, pixels.len()),
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self { width, height, pixels: vec![value; width * height] })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn to_float(&self) -> FloatImage {
        FloatImage { width: self.width, height: self.height, data: self.pixels.iter().map(|&p| p as f64).collect() }
    }

    /// Sets every pixel outside `mask` to white.
    pub fn whiten_background(&mut self, mask: &ForegroundMask) {
        debug_assert!(mask.matches(self));
        for (p, &fg) in self.pixels.iter_mut().zip(mask.bits()) {
            if !fg {
                *p = 255;
            }
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(b"P5") {
            decode_pgm(&bytes)
        } else if bytes.starts_with(b"\x89PNG") {
            decode_png(&bytes)
        } else {
            Err(Error::ImageFormat(format!("{}: unrecognized image format (expected PGM P5 or PNG)", path.display())))
        }
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode_pgm()).map_err(|e| Error::io(path, e))
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() + 20);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height).expect("write to vec");
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Three-channel 8-bit image, row-major interleaved RGB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbRaster {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbRaster {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != 3 * width * height {
            return Err(Error::Dimension {
                width,
                height,
                reason: format!("expected {} bytes of RGB, got {}", 3 * width * height, data.len()),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Input image of either kind accepted by the preprocessing pipeline.
#[derive(Clone, Debug)]
pub enum InputImage {
    Gray(GrayRaster),
    Rgb(RgbRaster),
}

impl InputImage {
    /// Reads PGM or PNG; color PNGs stay three-channel.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(b"P5") {
            return decode_pgm(&bytes).map(InputImage::Gray);
        }
        if !bytes.starts_with(b"\x89PNG") {
            return Err(Error::ImageFormat(format!(
                "{}: unrecognized image format (expected PGM P5 or PNG)",
                path.display()
            )));
        }
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.display())))?;
        if img.color().has_color() {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            Ok(InputImage::Rgb(RgbRaster::new(w as usize, h as usize, rgb.into_raw())?))
        } else {
            let g = img.to_luma8();
            let (w, h) = g.dimensions();
            Ok(InputImage::Gray(GrayRaster::new(w as usize, h as usize, g.into_raw())?))
        }
    }
}

/// Boolean foreground mask; `true` marks fingerprint area.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ForegroundMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ForegroundMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(Error::Dimension {
                width,
                height,
                reason: format!("expected {} mask bits, got {}", width * height, bits.len()),
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self { width, height, bits: vec![true; width * height] })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        check_dims(width, height)?;
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn matches(&self, img: &GrayRaster) -> bool {
        self.width == img.width && self.height == img.height
    }

    /// Renders the mask as a 0/255 gray image.
    pub fn to_raster(&self) -> GrayRaster {
        GrayRaster {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    /// Interprets a gray image as a mask (nonzero = foreground).
    pub fn from_raster(img: &GrayRaster) -> Self {
        Self { width: img.width, height: img.height, bits: img.pixels.iter().map(|&p| p >= 128).collect() }
    }

    /// Intersection-over-union with another mask of the same size.
    pub fn iou(&self, other: &ForegroundMask) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Floating-point working image used by the filters.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FloatImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Value at integer coordinates with edge replication.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// integers), edges replicated.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let a = self.get_clamped(xi, yi);
        let b = self.get_clamped(xi + 1, yi);
        let c = self.get_clamped(xi, yi + 1);
        let d = self.get_clamped(xi + 1, yi + 1);
        let top = a + (b - a) * fx;
        let bottom = c + (d - c) * fx;
        top + (bottom - top) * fy
    }

    /// Quantizes to 8 bits with round-half-away-from-zero and clamping.
    pub fn to_gray(&self) -> GrayRaster {
        GrayRaster { width: self.width, height: self.height, pixels: self.data.iter().map(|&v| clamp_u8(v)).collect() }
    }
}

#[inline]
pub fn clamp_u8(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension { width, height, reason: "image must be at least 1x1".into() });
    }
    Ok(())
}

fn decode_png(bytes: &[u8]) -> Result<GrayRaster> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::ImageFormat(e.to_string()))?;
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let rgb = RgbRaster::new(w as usize, h as usize, rgb.into_raw())?;
        crate::imaging::to_grayscale(&rgb)
    } else {
        let g = img.to_luma8();
        let (w, h) = g.dimensions();
        GrayRaster::new(w as usize, h as usize, g.into_raw())
    }
}

/// Decodes a binary PGM with maxval 255. Comments (`#`) in the header are
/// skipped.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayRaster> {
    let mut pos = 0usize;
    let mut fields = [0usize; 3];
    if !bytes.starts_with(b"P5") {
        return Err(Error::ImageFormat("missing P5 magic".into()));
    }
    pos += 2;
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while let Some(&c) = bytes.get(pos) {
                        pos += 1;
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| c.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::ImageFormat(format!("malformed PGM header at byte {pos}")));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::ImageFormat(format!("malformed PGM header at byte {start}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::ImageFormat(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates header and raster
    if !bytes.get(pos).is_some_and(|c| c.is_ascii_whitespace()) {
        return Err(Error::ImageFormat("missing whitespace after PGM header".into()));
    }
    pos += 1;
    let need = width * height;
    let data = bytes.get(pos..pos + need).ok_or_else(|| {
        Error::ImageFormat(format!("truncated PGM raster: need {need} bytes, have {}", bytes.len().saturating_sub(pos)))
    })?;
    GrayRaster::new(width, height, data.to_vec())
}
