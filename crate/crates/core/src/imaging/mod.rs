//! Image-side processing: grayscale conversion, CLAHE enhancement, ridge
//! period estimation and normalization, segmentation, rotation, and the
//! composed preprocessing pipeline.

mod clahe;
mod color;
mod period;
mod pipeline;
mod segment;

pub use clahe::{clahe_pass, enhance_iterative};
pub use color::{to_grayscale, LUMA_WEIGHTS};
pub use period::{
    block_periods, estimate_ridge_period, normalize_ridge_frequency, normalize_with_mask, scaled_dims,
    MIN_PEAK_CORRELATION, MIN_PERIODIC_FRACTION, PERIOD_BLOCK_PX,
};
pub use pipeline::{preprocess, PipelineMeta, PreprocessConfig, Preprocessed, RotationMode, StageRecord};
pub use segment::{close, mask_axis, rotate_upright, segment_foreground, MaskAxis, Rotated, MIN_AXIS_RATIO};
