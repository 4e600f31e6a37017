//! Ground-truth comparisons on a synthetic corpus and quality baselines.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context};
use clfq::eval::{
    attach_quality, edc_curve, edc_pauc, toy_match, ComparisonRecord, EdcConfig, EdcCurve, MatchTemplate, MatcherConfig,
};
use clfq::features::{read_feature_csv_file, FeatureConfig, FeatureVector};
use clfq::forest::ForestModel;
use clfq::imaging::PreprocessConfig;
use clfq::sharpness::{ait_sharpness, SharpnessConfig};
use clfq::synthgen::{derive_seed, generate_sample, read_manifest_file, SynthConfig};
use clfq::{ForegroundMask, GrayRaster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// What a comparison needs from one corpus image.
pub struct EvalSample {
    pub id: String,
    /// Base-pattern seed shared by impressions of one finger.
    pub finger: u64,
    /// Degraded capture, input of capture-level metrics.
    pub raw: GrayRaster,
    pub features: FeatureVector,
    pub template: MatchTemplate,
}

/// Generates an evaluation corpus in memory, in manifest order.
pub fn generate_eval_samples(
    cfg: &SynthConfig,
    pre: &PreprocessConfig,
    feat: &FeatureConfig,
) -> clfq::Result<Vec<EvalSample>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..cfg.presets.len()).flat_map(|p| (0..cfg.n_per_class).map(move |i| (p, i))).collect();
    jobs.par_iter()
        .map(|&(p, i)| {
            let s = generate_sample(cfg, p, i, pre, feat)?;
            Ok(EvalSample {
                template: MatchTemplate::new(&s.processed.sample, &s.processed.mask)?,
                id: s.record.image_id,
                finger: s.record.seed,
                raw: s.raw,
                features: s.features,
            })
        })
        .collect()
}

/// Reads a corpus written by `synth`: manifest, feature table and the
/// `raw/`, `samples/`, `masks/` image folders.
pub fn load_eval_samples(dir: &Path) -> anyhow::Result<Vec<EvalSample>> {
    let manifest = read_manifest_file(&dir.join("manifest.csv"))?;
    let features: HashMap<String, FeatureVector> =
        read_feature_csv_file(dir.join("features.csv"))?.into_iter().map(|r| (r.image_id, r.features)).collect();
    manifest
        .par_iter()
        .map(|m| {
            let id = &m.image_id;
            let load = |sub: &str| GrayRaster::read(dir.join(sub).join(format!("{id}.pgm")));
            let sample = load("samples")?;
            let mask = ForegroundMask::from_raster(&load("masks")?);
            Ok(EvalSample {
                id: id.clone(),
                finger: m.seed,
                raw: load("raw")?,
                features: features.get(id).cloned().with_context(|| format!("{id} missing from features.csv"))?,
                template: MatchTemplate::new(&sample, &mask)?,
            })
        })
        .collect()
}

/// Comparison plan: every pair of impressions of a finger is mated; the
/// first impression of each finger against the last impression of the
/// next finger (cyclically) is non-mated.
pub fn pair_plan(fingers: &[u64]) -> Vec<(usize, usize, bool)> {
    let mut groups: Vec<(u64, Vec<usize>)> = Vec::new();
    for (i, &f) in fingers.iter().enumerate() {
        match groups.iter_mut().find(|g| g.0 == f) {
            Some(g) => g.1.push(i),
            None => groups.push((f, vec![i])),
        }
    }
    let mut plan = Vec::new();
    for (_, members) in &groups {
        for (k, &a) in members.iter().enumerate() {
            for &b in &members[k + 1..] {
                plan.push((a, b, true));
            }
        }
    }
    if groups.len() > 1 {
        for k in 0..groups.len() {
            let next = &groups[(k + 1) % groups.len()].1;
            plan.push((groups[k].1[0], *next.last().expect("non-empty group"), false));
        }
    }
    plan
}

/// Scores the pair plan with the toy matcher. Qualities are left at 0.
pub fn self_match(samples: &[EvalSample], cfg: &MatcherConfig) -> clfq::Result<Vec<ComparisonRecord>> {
    let fingers: Vec<u64> = samples.iter().map(|s| s.finger).collect();
    pair_plan(&fingers)
        .par_iter()
        .map(|&(a, b, mated)| {
            Ok(ComparisonRecord {
                probe_id: samples[a].id.clone(),
                reference_id: samples[b].id.clone(),
                mated,
                score: toy_match(&samples[a].template, &samples[b].template, cfg)?,
                q1: 0,
                q2: 0,
            })
        })
        .collect()
}

/// Per-image quality source.
pub enum QualitySource<'a> {
    Model(&'a ForestModel),
    Sharpness(&'a SharpnessConfig),
    /// Uniform integers in `[0, 100]`, seeded per image id.
    Random(u64),
    Constant(u8),
}

impl QualitySource<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            QualitySource::Model(_) => "model",
            QualitySource::Sharpness(_) => "sharpness",
            QualitySource::Random(_) => "random",
            QualitySource::Constant(_) => "constant",
        }
    }

    pub fn assess(&self, samples: &[EvalSample]) -> clfq::Result<HashMap<String, u8>> {
        samples
            .par_iter()
            .map(|s| {
                let q = match self {
                    QualitySource::Model(m) => m.score_vector(&s.features)?,
                    QualitySource::Sharpness(cfg) => ait_sharpness(&s.raw, cfg)?,
                    QualitySource::Random(seed) => random_quality(*seed, &s.id),
                    QualitySource::Constant(q) => *q,
                };
                Ok((s.id.clone(), q))
            })
            .collect()
    }
}

/// Uniform quality in `[0, 100]` keyed by seed and image id, so it does
/// not depend on corpus order.
pub fn random_quality(seed: u64, id: &str) -> u8 {
    let h = id.bytes().fold(0u64, |acc, b| derive_seed(acc, &[b as u64]));
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[h])).random_range(0..=100)
}

/// EDC and its PAUC for one quality assignment.
pub fn edc_for(
    records: &[ComparisonRecord],
    quality: &HashMap<String, u8>,
    cfg: &EdcConfig,
) -> anyhow::Result<(EdcCurve, f64)> {
    let with_q = attach_quality(records, quality)?;
    let curve = edc_curve(&with_q, cfg)?;
    let pauc = edc_pauc(&curve, cfg.pauc_limit)?;
    Ok((curve, pauc))
}

/// Parses `name=path` quality arguments.
pub fn parse_quality_arg(arg: &str) -> anyhow::Result<(String, String)> {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), path.to_string())),
        _ => bail!("quality argument {arg:?} must look like NAME=PATH"),
    }
}
