//! The merged run configuration.

use std::path::Path;

use anyhow::Context;
use clfq::eval::{EdcConfig, MatcherConfig};
use clfq::features::FeatureConfig;
use clfq::forest::TrainParams;
use clfq::imaging::PreprocessConfig;
use clfq::sharpness::SharpnessConfig;
use clfq::synthgen::{QualityPreset, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every tunable of every command. Loaded from one TOML file; sections
/// that are absent keep their defaults and unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, overrides the seeds of `synth` and `train`.
    pub seed: Option<u64>,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub sharpness: SharpnessConfig,
    pub train: TrainParams,
    pub edc: EdcConfig,
    pub matcher: MatcherConfig,
    /// Training corpus.
    pub synth: SynthConfig,
    /// Held-out corpus whose labels `train` checks against the new model.
    /// Its seed, like that of `eval_synth`, is derived from `synth.seed`.
    /// Fields missing from a present section take the generic corpus
    /// defaults, not the split's own.
    pub validation: SynthConfig,
    /// Self-match evaluation corpus.
    pub eval_synth: SynthConfig,
    /// Quality the `constant` baseline assigns to every image.
    pub constant_quality: u8,
}

/// Offset between the training and evaluation corpus seeds, so the two
/// never share base patterns.
pub const EVAL_SEED_OFFSET: u64 = 1_000_003;
pub const VALIDATION_SEED_OFFSET: u64 = 2_000_003;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            sharpness: SharpnessConfig::default(),
            train: TrainParams::default(),
            edc: EdcConfig::default(),
            matcher: MatcherConfig::default(),
            synth: SynthConfig::default(),
            validation: default_validation_synth(),
            eval_synth: default_eval_synth(),
            constant_quality: 50,
        }
    }
}

/// 500 samples per training preset.
pub fn default_validation_synth() -> SynthConfig {
    SynthConfig { n_per_class: 500, seed: VALIDATION_SEED_OFFSET, ..SynthConfig::default() }
}

/// 150 fingers with two impressions each, c uniform over the whole range.
pub fn default_eval_synth() -> SynthConfig {
    SynthConfig {
        n_per_class: 300,
        presets: vec![QualityPreset { name: "eval".into(), c_range: (0.0, 100.0), label: 1 }],
        impressions_per_finger: 2,
        seed: EVAL_SEED_OFFSET,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(CliError::Usage)?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(anyhow::anyhow!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    /// Applies the top-level seed, derives the `validation` and
    /// `eval_synth` seeds from the training corpus seed and checks every
    /// section.
    pub fn resolve(mut self, seed_flag: Option<u64>) -> Result<Self, CliError> {
        if seed_flag.is_some() {
            self.seed = seed_flag;
        }
        if let Some(s) = self.seed {
            self.synth.seed = s;
            self.train.seed = s;
        }
        self.validation.seed = self.synth.seed.wrapping_add(VALIDATION_SEED_OFFSET);
        self.eval_synth.seed = self.synth.seed.wrapping_add(EVAL_SEED_OFFSET);
        let checks: [(&str, clfq::Result<()>); 7] = [
            ("preprocess", self.preprocess.validate()),
            ("sharpness", self.sharpness.validate()),
            ("train", self.train.validate(clfq::features::FEATURE_COUNT)),
            ("edc", self.edc.validate()),
            ("synth", self.synth.validate()),
            ("validation", self.validation.validate()),
            ("eval_synth", self.eval_synth.validate()),
        ];
        for (section, r) in checks {
            r.map_err(|e| CliError::Usage(anyhow::anyhow!("config section [{section}]: {e}")))?;
        }
        if self.constant_quality > 100 {
            return Err(CliError::Usage(anyhow::anyhow!("constant_quality must be <= 100")));
        }
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("[train]\nn_tree = 5").is_err());
        let cfg = RunConfig::from_toml("[train]\nn_trees = 5").unwrap();
        assert_eq!(cfg.train.n_trees, 5);
    }

    #[test]
    fn seed_overrides_sections() {
        let cfg = RunConfig::from_toml("seed = 7").unwrap().resolve(None).unwrap();
        assert_eq!((cfg.synth.seed, cfg.train.seed), (7, 7));
        assert_eq!(cfg.eval_synth.seed, 7 + EVAL_SEED_OFFSET);
        assert_eq!(cfg.validation.seed, 7 + VALIDATION_SEED_OFFSET);
        let cfg = cfg.resolve(Some(9)).unwrap();
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.eval_synth.seed, 9 + EVAL_SEED_OFFSET);
        let cfg = RunConfig::from_toml("[synth]\nseed = 4\n[validation]\nseed = 4").unwrap().resolve(None).unwrap();
        assert_eq!(cfg.validation.seed, 4 + VALIDATION_SEED_OFFSET);
    }

    #[test]
    fn invalid_sections_are_usage_errors() {
        let cfg = RunConfig::from_toml("[edc]\nf = 1.5").unwrap();
        assert!(matches!(cfg.resolve(None), Err(CliError::Usage(_))));
    }
}
