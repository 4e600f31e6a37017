//! Oriented windows and 1-D ridge-valley signatures.

use crate::raster::{FloatImage, ForegroundMask};

/// Samples of a window rotated so that ridges run along its rows' normal:
/// column `i` walks across the ridges, row `j` along them.
#[derive(Clone, Debug)]
pub struct OrientedPatch {
    pub across: usize,
    pub along: usize,
    /// Row-major `along x across`; `None` where the sample hit background.
    pub values: Vec<Option<f64>>,
}

impl OrientedPatch {
    /// Samples around `(cx, cy)` for ridges running at `ridge_angle`.
    /// `spacing` is the distance between neighbouring columns in pixels.
    #[allow(clippy::too_many_arguments)]
    pub fn sample(
        img: &FloatImage,
        mask: Option<&ForegroundMask>,
        cx: f64,
        cy: f64,
        ridge_angle: f64,
        across: usize,
        along: usize,
        spacing: f64,
    ) -> Self {
        let (dx, dy) = (ridge_angle.cos(), ridge_angle.sin());
        let (nx, ny) = (-dy, dx);
        let u0 = (across as f64 - 1.0) / 2.0;
        let v0 = (along as f64 - 1.0) / 2.0;
        let (w, h) = (img.width as f64, img.height as f64);
        let mut values = Vec::with_capacity(across * along);
        for j in 0..along {
            let v = j as f64 - v0;
            for i in 0..across {
                let u = (i as f64 - u0) * spacing;
                let x = cx + u * nx + v * dx;
                let y = cy + u * ny + v * dy;
                let inside = x > -0.5 && y > -0.5 && x < w - 0.5 && y < h - 0.5;
                let fg = inside && mask.is_none_or(|m| m.get(x.round().max(0.0) as usize, y.round().max(0.0) as usize));
                values.push(fg.then(|| img.sample(x, y)));
            }
        }
        Self { across, along, values }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.across + i]
    }

    /// Column means; a column with fewer than half of its samples in the
    /// foreground yields `None`.
    pub fn signature(&self) -> Vec<Option<f64>> {
        (0..self.across)
            .map(|i| {
                let (mut sum, mut n) = (0.0, 0usize);
                for j in 0..self.along {
                    if let Some(v) = self.get(i, j) {
                        sum += v;
                        n += 1;
                    }
                }
                (2 * n >= self.along && n > 0).then(|| sum / n as f64)
            })
            .collect()
    }
}

/// Longest run of consecutive defined entries.
pub fn longest_defined_run(sig: &[Option<f64>]) -> Vec<f64> {
    let mut best: &[Option<f64>] = &[];
    let mut start = 0;
    for i in 0..=sig.len() {
        if i == sig.len() || sig[i].is_none() {
            if i - start > best.len() {
                best = &sig[start..i];
            }
            start = i + 1;
        }
    }
    best.iter().map(|v| v.expect("defined run")).collect()
}

/// Least-squares line `a + b * i` through the signature.
pub fn linear_fit(sig: &[f64]) -> (f64, f64) {
    let n = sig.len() as f64;
    if sig.len() < 2 {
        return (sig.first().copied().unwrap_or(0.0), 0.0);
    }
    let mx = (n - 1.0) / 2.0;
    let my = sig.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in sig.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Dominant period of a signature from its normalized autocorrelation: the
/// first local maximum (lag in `2..=n/2`) whose correlation reaches
/// `min_correlation`, refined by parabolic interpolation.
pub fn autocorrelation_period(sig: &[f64], min_correlation: f64) -> Option<f64> {
    let n = sig.len();
    if n < 8 {
        return None;
    }
    let (a, b) = linear_fit(sig);
    let d: Vec<f64> = sig.iter().enumerate().map(|(i, &v)| v - (a + b * i as f64)).collect();
    let max_lag = n / 2;
    let r: Vec<f64> = (0..=max_lag + 1)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
            for i in 0..n - k {
                sab += d[i] * d[i + k];
                saa += d[i] * d[i];
                sbb += d[i + k] * d[i + k];
            }
            let den = (saa * sbb).sqrt();
            if den > 1e-12 {
                sab / den
            } else {
                0.0
            }
        })
        .collect();
    if r[0] == 0.0 {
        return None;
    }
    // the correlation must first drop below zero half a period in
    (2..=max_lag).find_map(|k| {
        let dipped = r[1..k].iter().any(|&v| v < 0.0);
        if dipped && r[k] >= min_correlation && r[k] >= r[k - 1] && r[k] >= r[k + 1] {
            let den = r[k - 1] - 2.0 * r[k] + r[k + 1];
            let off = if den.abs() > 1e-12 { (0.5 * (r[k - 1] - r[k + 1]) / den).clamp(-0.5, 0.5) } else { 0.0 };
            Some(k as f64 + off)
        } else {
            None
        }
    })
}
