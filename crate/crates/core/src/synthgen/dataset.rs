//! Labeled corpus generation: render, degrade, preprocess, extract.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{degrade, generate_base_pattern, params_from_quality, DegradationParams};
use crate::error::{Error, Result};
use crate::features::{extract_feature_vector, FeatureConfig, FeatureRow, FeatureVector, FEATURE_NAMES};
use crate::forest::{ForestModel, LabeledDataset, LabeledRow};
use crate::imaging::{preprocess, PreprocessConfig, Preprocessed};
use crate::raster::{GrayRaster, InputImage};

/// Attempts per sample before generation gives up.
pub const MAX_ATTEMPTS: u32 = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityPreset {
    pub name: String,
    pub c_range: (f64, f64),
    pub label: u8,
}

impl QualityPreset {
    pub fn low() -> Self {
        Self { name: "low".into(), c_range: (0.0, 33.0), label: 0 }
    }

    pub fn high() -> Self {
        Self { name: "high".into(), c_range: (66.0, 100.0), label: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.c_range;
        if !(0.0 <= lo && lo <= hi && hi <= 100.0) {
            return Err(Error::InvalidParam(format!(
                "preset {:?}: c_range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 100",
                self.name
            )));
        }
        if self.label > 1 {
            return Err(Error::InvalidParam(format!("preset {:?}: label must be 0 or 1", self.name)));
        }
        if self.name.is_empty() || self.name.contains(|c: char| !c.is_ascii_alphanumeric() && c != '-') {
            return Err(Error::InvalidParam(format!(
                "preset name {:?} must be non-empty ASCII alphanumerics or '-'",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub presets: Vec<QualityPreset>,
    /// Consecutive samples of a preset that share one base pattern.
    pub impressions_per_finger: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 2000,
            presets: vec![QualityPreset::low(), QualityPreset::high()],
            impressions_per_finger: 1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::InvalidParam("n_per_class must be >= 1".into()));
        }
        if self.impressions_per_finger == 0 {
            return Err(Error::InvalidParam("impressions_per_finger must be >= 1".into()));
        }
        if self.presets.is_empty() {
            return Err(Error::InvalidParam("at least one preset is required".into()));
        }
        for p in &self.presets {
            p.validate()?;
        }
        let mut names: Vec<&str> = self.presets.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParam("preset names must be unique".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over a running state; maps structured indices to
/// well-spread, independent seeds.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    parts
        .iter()
        .fold(mix(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)), |acc, &p| mix(acc ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_id: String,
    /// Base-pattern seed; samples sharing it show the same finger.
    pub seed: u64,
    pub c: f64,
    pub label: u8,
    pub preset: String,
    /// Failed attempts replaced before this sample succeeded.
    pub retries: u32,
    pub blur_sigma: f64,
    pub motion_len: f64,
    pub noise_sigma: f64,
    pub contrast_scale: f64,
    pub illumination_gradient: f64,
    pub rotation_jitter: f64,
    pub dirt_density: f64,
    pub degradation_seed: u64,
}

impl ManifestRecord {
    pub fn params(&self) -> DegradationParams {
        DegradationParams {
            blur_sigma: self.blur_sigma,
            motion_len: self.motion_len,
            noise_sigma: self.noise_sigma,
            contrast_scale: self.contrast_scale,
            illumination_gradient: self.illumination_gradient,
            rotation_jitter: self.rotation_jitter,
            dirt_density: self.dirt_density,
            seed: self.degradation_seed,
        }
    }
}

/// A generated sample with its intermediate images.
#[derive(Clone, Debug)]
pub struct GeneratedSample {
    pub record: ManifestRecord,
    /// Degraded capture before preprocessing.
    pub raw: GrayRaster,
    pub processed: Preprocessed,
    pub features: FeatureVector,
}

/// Generates sample `index` of `preset_index`. A failing attempt is
/// replaced by a fresh draw of c and degradation; the base pattern is kept
/// so every impression still shows its finger.
pub fn generate_sample(
    cfg: &SynthConfig,
    preset_index: usize,
    index: usize,
    pre: &PreprocessConfig,
    feat: &FeatureConfig,
) -> Result<GeneratedSample> {
    let preset = cfg
        .presets
        .get(preset_index)
        .ok_or_else(|| Error::InvalidParam(format!("preset index {preset_index} out of range")))?;
    let finger = (index / cfg.impressions_per_finger) as u64;
    let base_seed = derive_seed(cfg.seed, &[preset_index as u64, finger]);
    let base = generate_base_pattern(base_seed);
    let mut last_err = None;
    for attempt in 0..MAX_ATTEMPTS {
        let sample_seed = derive_seed(cfg.seed, &[preset_index as u64, finger, index as u64, attempt as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let (lo, hi) = preset.c_range;
        let c = if lo < hi { rng.random_range(lo..=hi) } else { lo };
        let params = params_from_quality(c, rng.random())?;
        let raw = degrade(&base.image, &base.mask, &params)?;
        let outcome = preprocess(&InputImage::Gray(raw.clone()), pre)
            .and_then(|p| extract_feature_vector(&p.sample, &p.mask, feat).map(|f| (p, f)));
        match outcome {
            Ok((processed, features)) => {
                let record = ManifestRecord {
                    image_id: format!("{}_{index:05}", preset.name),
                    seed: base_seed,
                    c,
                    label: preset.label,
                    preset: preset.name.clone(),
                    retries: attempt,
                    blur_sigma: params.blur_sigma,
                    motion_len: params.motion_len,
                    noise_sigma: params.noise_sigma,
                    contrast_scale: params.contrast_scale,
                    illumination_gradient: params.illumination_gradient,
                    rotation_jitter: params.rotation_jitter,
                    dirt_density: params.dirt_density,
                    degradation_seed: params.seed,
                };
                return Ok(GeneratedSample { record, raw, processed, features });
            }
            Err(e) => {
                log::debug!("{}_{index:05} attempt {attempt}: {e}", preset.name);
                last_err = Some(e);
            }
        }
    }
    Err(Error::InvalidParam(format!(
        "{}_{index:05}: no usable sample after {MAX_ATTEMPTS} attempts, last error: {}",
        preset.name,
        last_err.expect("at least one attempt")
    )))
}

/// Generated corpus without the images.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub manifest: Vec<ManifestRecord>,
    pub features: Vec<FeatureRow>,
}

impl Corpus {
    /// Total failed attempts that were regenerated.
    pub fn regenerated(&self) -> u64 {
        self.manifest.iter().map(|r| r.retries as u64).sum()
    }

    pub fn labeled(&self) -> Result<LabeledDataset> {
        LabeledDataset::from_vectors(
            self.manifest
                .iter()
                .zip(&self.features)
                .map(|(m, f)| (m.image_id.clone(), f.features.clone(), m.label, format!("synth:{}", m.preset))),
        )
    }
}

/// Where generated images go; `None` keeps everything in memory.
pub struct ImageSink<'a> {
    pub dir: &'a Path,
}

impl ImageSink<'_> {
    /// `raw/<id>.pgm` (degraded capture), `samples/<id>.pgm` and
    /// `masks/<id>.pgm` (preprocessed).
    fn write(&self, s: &GeneratedSample) -> Result<()> {
        let id = &s.record.image_id;
        s.raw.write_pgm(self.dir.join("raw").join(format!("{id}.pgm")))?;
        s.processed.sample.write_pgm(self.dir.join("samples").join(format!("{id}.pgm")))?;
        s.processed.mask.to_raster().write_pgm(self.dir.join("masks").join(format!("{id}.pgm")))
    }

    fn prepare(&self) -> Result<()> {
        for sub in ["raw", "samples", "masks"] {
            let d = self.dir.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        Ok(())
    }
}

/// Generates `n_per_class` samples for each preset, in parallel over
/// samples. Output order is preset order, then sample index.
pub fn generate_dataset(
    cfg: &SynthConfig,
    pre: &PreprocessConfig,
    feat: &FeatureConfig,
    sink: Option<&ImageSink>,
) -> Result<Corpus> {
    cfg.validate()?;
    if let Some(s) = sink {
        s.prepare()?;
    }
    let jobs: Vec<(usize, usize)> =
        (0..cfg.presets.len()).flat_map(|p| (0..cfg.n_per_class).map(move |i| (p, i))).collect();
    let samples: Vec<(ManifestRecord, FeatureRow)> = jobs
        .par_iter()
        .map(|&(p, i)| {
            let s = generate_sample(cfg, p, i, pre, feat)?;
            if let Some(sink) = sink {
                sink.write(&s)?;
            }
            let row = FeatureRow { image_id: s.record.image_id.clone(), features: s.features };
            Ok((s.record, row))
        })
        .collect::<Result<_>>()?;
    let (manifest, features) = samples.into_iter().unzip();
    let corpus = Corpus { manifest, features };
    if corpus.regenerated() > 0 {
        log::info!("regenerated {} failed attempts", corpus.regenerated());
    }
    Ok(corpus)
}

fn csv_err(path: &str, line: u64) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv { path: path.into(), line: e.position().map_or(line, |p| p.line()), reason: e.to_string() }
}

pub const MANIFEST_HEADER: [&str; 14] = [
    "image_id",
    "seed",
    "c",
    "label",
    "preset",
    "retries",
    "blur_sigma",
    "motion_len",
    "noise_sigma",
    "contrast_scale",
    "illumination_gradient",
    "rotation_jitter",
    "dirt_density",
    "degradation_seed",
];

pub fn write_manifest<W: Write>(out: W, records: &[ManifestRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_err("<manifest>", 0))?;
    }
    w.flush().map_err(|e| Error::io("<manifest>", e))
}

pub fn read_manifest<R: Read>(input: R, label: &str) -> Result<Vec<ManifestRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err(label, 1))?.clone();
    if !header.iter().eq(MANIFEST_HEADER) {
        return Err(Error::Csv {
            path: label.into(),
            line: 1,
            reason: format!("expected header {}", MANIFEST_HEADER.join(",")),
        });
    }
    r.deserialize().map(|rec| rec.map_err(csv_err(label, 0))).collect()
}

pub fn write_manifest_file(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_manifest(std::io::BufWriter::new(f), records)
}

pub fn read_manifest_file(path: &Path) -> Result<Vec<ManifestRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(std::io::BufReader::new(f), &path.display().to_string())
}

/// A held-out row whose predicted class disagrees with its label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMismatch {
    pub image_id: String,
    pub label: u8,
    pub predicted: u8,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub total: usize,
    pub error_rate: f64,
    /// Sorted by decreasing disagreement confidence, then id.
    pub mismatches: Vec<LabelMismatch>,
}

/// Predicts every row at threshold 0.5 and lists the disagreements.
pub fn validate_labels(model: &ForestModel, data: &LabeledDataset) -> Result<LabelReport> {
    if data.feature_names != model.feature_names {
        return Err(Error::FeatureCount { expected: model.n_features(), actual: data.feature_names.len() });
    }
    let mut mismatches = Vec::new();
    for r in &data.rows {
        let p = model.predict_prob(&r.features)?;
        let predicted = (p >= 0.5) as u8;
        if predicted != r.label {
            mismatches.push(LabelMismatch { image_id: r.id.clone(), label: r.label, predicted, probability: p });
        }
    }
    let confidence = |m: &LabelMismatch| (m.probability - 0.5).abs();
    mismatches.sort_by(|a, b| confidence(b).total_cmp(&confidence(a)).then_with(|| a.image_id.cmp(&b.image_id)));
    Ok(LabelReport {
        total: data.rows.len(),
        error_rate: if data.rows.is_empty() { 0.0 } else { mismatches.len() as f64 / data.rows.len() as f64 },
        mismatches,
    })
}

/// Relabel overrides: CSV `image_id,label`.
pub fn read_relabel_csv<R: Read>(input: R, label: &str) -> Result<Vec<(String, u8)>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err(label, 1))?.clone();
    if !header.iter().eq(["image_id", "label"]) {
        return Err(Error::Csv { path: label.into(), line: 1, reason: "expected header image_id,label".into() });
    }
    let mut out = Vec::new();
    for rec in r.deserialize::<(String, u8)>() {
        let (id, l) = rec.map_err(csv_err(label, 0))?;
        if l > 1 {
            return Err(Error::Csv {
                path: label.into(),
                line: out.len() as u64 + 2,
                reason: format!("label {l} must be 0 or 1"),
            });
        }
        out.push((id, l));
    }
    Ok(out)
}

pub fn write_relabel_csv<W: Write>(out: W, report: &LabelReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["image_id", "label"]).map_err(csv_err("<relabel>", 0))?;
    for m in &report.mismatches {
        w.write_record([m.image_id.as_str(), &m.predicted.to_string()]).map_err(csv_err("<relabel>", 0))?;
    }
    w.flush().map_err(|e| Error::io("<relabel>", e))
}

/// Joins a feature table with manifest labels by image id.
pub fn label_feature_rows(rows: &[FeatureRow], manifest: &[ManifestRecord]) -> Result<LabeledDataset> {
    let by_id: std::collections::HashMap<&str, &ManifestRecord> =
        manifest.iter().map(|m| (m.image_id.as_str(), m)).collect();
    let labeled = rows
        .iter()
        .map(|r| {
            let m = by_id
                .get(r.image_id.as_str())
                .ok_or_else(|| Error::InvalidParam(format!("feature row {:?} has no manifest entry", r.image_id)))?;
            Ok(LabeledRow {
                id: r.image_id.clone(),
                features: r.features.values().to_vec(),
                label: m.label,
                provenance: format!("synth:{}", m.preset),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), labeled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{train, TrainParams};

    fn small(n: usize, seed: u64) -> SynthConfig {
        SynthConfig { n_per_class: n, seed, ..SynthConfig::default() }
    }

    #[test]
    fn counts_and_determinism() {
        let cfg = small(10, 3);
        let (pre, feat) = (PreprocessConfig::default(), FeatureConfig::default());
        let a = generate_dataset(&cfg, &pre, &feat, None).unwrap();
        assert_eq!(a.manifest.len(), 20);
        assert_eq!(a.manifest.iter().filter(|m| m.label == 1).count(), 10);
        for m in &a.manifest {
            let preset = if m.label == 1 { QualityPreset::high() } else { QualityPreset::low() };
            assert!(m.c >= preset.c_range.0 && m.c <= preset.c_range.1);
        }
        let b = generate_dataset(&cfg, &pre, &feat, None).unwrap();
        let (mut ma, mut mb) = (Vec::new(), Vec::new());
        write_manifest(&mut ma, &a.manifest).unwrap();
        write_manifest(&mut mb, &b.manifest).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(a.features, b.features);
        let back = read_manifest(&ma[..], "m").unwrap();
        assert_eq!(back, a.manifest);
    }

    #[test]
    fn impressions_share_base_seed() {
        let cfg =
            SynthConfig { n_per_class: 4, impressions_per_finger: 2, presets: vec![QualityPreset::high()], seed: 1 };
        let (pre, feat) = (PreprocessConfig::default(), FeatureConfig::default());
        let s: Vec<_> = (0..4).map(|i| generate_sample(&cfg, 0, i, &pre, &feat).unwrap().record).collect();
        assert_eq!(s[0].seed, s[1].seed);
        assert_eq!(s[2].seed, s[3].seed);
        assert_ne!(s[0].seed, s[2].seed);
        assert_ne!(s[0].degradation_seed, s[1].degradation_seed);
    }

    #[test]
    fn validate_labels_flags_flipped_row() {
        let cfg = small(30, 8);
        let corpus = generate_dataset(&cfg, &PreprocessConfig::default(), &FeatureConfig::default(), None).unwrap();
        let data = corpus.labeled().unwrap();
        let params = TrainParams { n_trees: 30, ..TrainParams::default() };
        let model = train(&data, &params).unwrap().model;
        let clean = validate_labels(&model, &data).unwrap();
        assert!(clean.mismatches.is_empty(), "{:?}", clean.mismatches);

        let mut flipped = data.clone();
        let target = flipped.rows[0].id.clone();
        let new = 1 - flipped.rows[0].label;
        assert_eq!(flipped.relabel(&[(target.clone(), new)]), 1);
        let report = validate_labels(&model, &flipped).unwrap();
        assert_eq!(report.mismatches.len(), 1);
        let m = &report.mismatches[0];
        assert_eq!(m.image_id, target);
        assert!((m.probability - 0.5).abs() >= 0.3, "{m:?}");
        assert!((report.error_rate - 1.0 / 60.0).abs() < 1e-12);

        let mut buf = Vec::new();
        write_relabel_csv(&mut buf, &report).unwrap();
        let relabel = read_relabel_csv(&buf[..], "r").unwrap();
        assert_eq!(relabel, vec![(target, 1 - new)]);
    }

    #[test]
    fn derive_seed_separates_indices() {
        let mut seen = std::collections::HashSet::new();
        for a in 0..20 {
            for b in 0..20 {
                assert!(seen.insert(derive_seed(0, &[a, b])));
            }
        }
        assert_ne!(derive_seed(0, &[1]), derive_seed(1, &[1]));
    }

    #[test]
    fn preset_validation() {
        let mut p = QualityPreset::low();
        p.c_range = (40.0, 20.0);
        assert!(p.validate().is_err());
        let mut cfg = small(1, 0);
        cfg.presets[1].name = "low".into();
        assert!(cfg.validate().is_err());
    }
}
