//! The contactless-to-contact-like preprocessing pipeline.

use serde::{Deserialize, Serialize};

use super::clahe::enhance_iterative;
use super::color::to_grayscale;
use super::period::{estimate_ridge_period, normalize_with_mask};
use super::segment::{rotate_upright, segment_foreground};
use crate::error::{Error, Result};
use crate::raster::{ForegroundMask, GrayRaster, InputImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RotationMode {
    /// Input is already upright.
    #[default]
    Asis,
    /// Align the mask's principal axis with the vertical.
    AutoMoment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// `(tile side px, clip limit)` passes; tile sides strictly decreasing.
    pub clahe_schedule: Vec<(usize, f64)>,
    pub target_ridge_period: f64,
    pub acceptable_period_range: (f64, f64),
    pub rotation: RotationMode,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            clahe_schedule: vec![(64, 2.0), (32, 2.0), (16, 2.0)],
            target_ridge_period: 9.0,
            acceptable_period_range: (8.0, 12.0),
            rotation: RotationMode::Asis,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clahe_schedule.is_empty() {
            return Err(Error::InvalidParam("clahe_schedule must not be empty".into()));
        }
        if self.clahe_schedule.windows(2).any(|w| w[1].0 >= w[0].0) {
            return Err(Error::InvalidParam("clahe_schedule tile sides must be strictly decreasing".into()));
        }
        let (lo, hi) = self.acceptable_period_range;
        let t = self.target_ridge_period;
        if !(t > 0.0 && lo <= t && t <= hi) {
            return Err(Error::InvalidParam(format!(
                "target_ridge_period {t} must be positive and inside [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: String,
}

/// Per-image metadata of a pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineMeta {
    pub angle_deg: f64,
    pub measured_period_px: f64,
    pub scale_factor: f64,
    pub stages: Vec<StageRecord>,
}

#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub sample: GrayRaster,
    pub mask: ForegroundMask,
    pub meta: PipelineMeta,
}

fn record(stages: &mut Vec<StageRecord>, stage: &str, status: impl Into<String>) {
    stages.push(StageRecord { stage: stage.into(), status: status.into() });
}

/// grayscale → segment → rotate (auto only) → iterative CLAHE → period
/// estimate → frequency normalization → background whitening.
pub fn preprocess(input: &InputImage, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    cfg.validate()?;
    let mut stages = Vec::new();
    let gray = match input {
        InputImage::Gray(g) => {
            record(&mut stages, "grayscale", "skipped: already gray");
            g.clone()
        }
        InputImage::Rgb(rgb) => {
            let g = to_grayscale(rgb).map_err(|e| e.at_stage("grayscale"))?;
            record(&mut stages, "grayscale", "ok");
            g
        }
    };
    preprocess_gray(&gray, cfg, stages)
}

fn preprocess_gray(gray: &GrayRaster, cfg: &PreprocessConfig, mut stages: Vec<StageRecord>) -> Result<Preprocessed> {
    let mask = segment_foreground(gray).map_err(|e| e.at_stage("segment"))?;
    record(&mut stages, "segment", format!("ok: {} foreground px", mask.count()));
    let mut img = gray.clone();
    img.whiten_background(&mask);

    let (img, mask, angle) = match cfg.rotation {
        RotationMode::Asis => {
            record(&mut stages, "rotate", "skipped: rotation=asis");
            (img, mask, 0.0)
        }
        RotationMode::AutoMoment => {
            let r = rotate_upright(&img, &mask).map_err(|e| e.at_stage("rotate"))?;
            let status = if r.degenerate {
                "flagged: mask nearly circular, identity rotation".to_string()
            } else {
                format!("ok: {:.2} deg", r.angle_deg)
            };
            record(&mut stages, "rotate", status);
            (r.image, r.mask, r.angle_deg)
        }
    };

    let mut enhanced = enhance_iterative(&img, &cfg.clahe_schedule).map_err(|e| e.at_stage("enhance"))?;
    enhanced.whiten_background(&mask);
    record(&mut stages, "enhance", format!("ok: {} CLAHE passes", cfg.clahe_schedule.len()));

    let period = estimate_ridge_period(&enhanced, &mask).map_err(|e| e.at_stage("estimate_period"))?;
    record(&mut stages, "estimate_period", format!("ok: {period:.3} px"));

    let (mut sample, mask, scale) =
        normalize_with_mask(&enhanced, &mask, period, cfg.target_ridge_period).map_err(|e| e.at_stage("normalize"))?;
    record(&mut stages, "normalize", format!("ok: scale {scale:.4}"));

    sample.whiten_background(&mask);
    record(&mut stages, "whiten", "ok");

    // informational: a sample outside the acceptable range is still returned
    let (lo, hi) = cfg.acceptable_period_range;
    let status = match estimate_ridge_period(&sample, &mask) {
        Ok(p) if (lo..=hi).contains(&p) => format!("ok: {p:.3} px"),
        Ok(p) => format!("warning: {p:.3} px outside [{lo}, {hi}]"),
        Err(e) => format!("warning: {e}"),
    };
    record(&mut stages, "verify_period", status);

    Ok(Preprocessed {
        sample,
        mask,
        meta: PipelineMeta { angle_deg: angle, measured_period_px: period, scale_factor: scale, stages },
    })
}
