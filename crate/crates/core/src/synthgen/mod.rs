//! Synthetic contactless-like fingerprint corpus generation.

mod dataset;
mod degrade;
mod grating;
mod pattern;

pub use dataset::{
    derive_seed, generate_dataset, generate_sample, label_feature_rows, read_manifest, read_manifest_file,
    read_relabel_csv, validate_labels, write_manifest, write_manifest_file, write_relabel_csv, Corpus, GeneratedSample,
    ImageSink, LabelMismatch, LabelReport, ManifestRecord, QualityPreset, SynthConfig, MANIFEST_HEADER, MAX_ATTEMPTS,
};
pub use degrade::{
    degrade, params_from_quality, severity, DegradationParams, BLUR_SIGMA_RANGE, CONTRAST_SCALE_RANGE,
    DIRT_DENSITY_RANGE, ILLUMINATION_GRADIENT_RANGE, JITTER_FRACTION, MOTION_LEN_RANGE, NOISE_SIGMA_RANGE,
    ROTATION_JITTER_RANGE, SEVERITY_KNOTS,
};
pub use grating::{sinusoid_grating, square_grating};
pub use pattern::{
    generate_base_pattern, render_ridges, BasePattern, OrientationField, PATTERN_HEIGHT, PATTERN_WIDTH, PERIOD_RANGE,
};
