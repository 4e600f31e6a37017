//! Quality assessment for contactless fingerprint samples.
//!
//! Samples are preprocessed into contact-like rasters, described by 65
//! block-based quality features, and scored with a random forest. The
//! `eval` module measures how well any quality score predicts
//! recognition errors.

pub mod error;
pub mod eval;
pub mod features;
pub mod filters;
pub mod forest;
pub mod imaging;
pub mod raster;
pub mod sharpness;
pub mod synthgen;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use raster::{ForegroundMask, GrayRaster, InputImage, RgbRaster};
