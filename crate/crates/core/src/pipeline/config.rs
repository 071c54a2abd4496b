use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cf::{GenerationConfig, LossWeights, TrainConfig};
use crate::classifier::ClassifierConfig;
use crate::encoding::{DatasetSchema, EncoderKind, FeatureEncoder};
use crate::flow::FlowConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Paths {
    pub fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        path.as_deref().ok_or_else(|| Error::Config(format!("missing required path --{flag}")))
    }
}

/// Feature-level domain constraints turned into loss weights at training time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    pub enabled: bool,
    /// Proximity weight given to immutable features.
    pub immutable_weight: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self { enabled: false, immutable_weight: 3.0 }
    }
}

/// Everything one experiment needs. The top-level `seed` is copied into every
/// component config by [`RunConfig::with_seed`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    /// Fraction of rows used for training.
    pub split: f64,
    pub seed: u64,
    pub encoder: EncoderKind,
    pub k_folds: usize,
    pub classifier: ClassifierConfig,
    pub flow: FlowConfig,
    pub train: TrainConfig,
    /// `weights` and `monotonic` are filled from the schema and `constraints`.
    pub weights: LossWeights,
    pub constraints: ConstraintConfig,
    pub generation: GenerationConfig,
    /// Number of test inputs to explain.
    pub n_tes: usize,
    /// Test rows qualify when their predicted probability is below this.
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            split: 0.9,
            seed: 0,
            encoder: EncoderKind::Te,
            k_folds: 10,
            classifier: ClassifierConfig::default(),
            flow: FlowConfig::default(),
            train: TrainConfig::default(),
            weights: LossWeights::default(),
            constraints: ConstraintConfig::default(),
            generation: GenerationConfig::default(),
            n_tes: 100,
            threshold: 0.5,
        }
    }
}

impl RunConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.classifier.seed = seed;
        self.flow.seed = seed;
        self.train.seed = seed;
        self.generation.seed = seed;
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split must be in (0, 1), got {}", self.split)));
        }
        if self.k_folds < 2 {
            return Err(Error::Config(format!("k_folds must be at least 2, got {}", self.k_folds)));
        }
        if self.n_tes == 0 {
            return Err(Error::Config("n_tes must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!("threshold must be in (0, 1], got {}", self.threshold)));
        }
        if !(self.constraints.immutable_weight >= 0.0 && self.constraints.immutable_weight.is_finite()) {
            return Err(Error::Config("immutable_weight must be a finite non-negative number".into()));
        }
        self.classifier.validate()?;
        self.flow.validate()?;
        self.generation.validate()
    }

    /// Loss weights over encoded columns for this schema and encoder.
    ///
    /// Unconstrained runs use the schema's proximity weights and no monotone
    /// penalty. Constrained runs raise immutable features to
    /// `immutable_weight` and penalize decreases of monotone features.
    pub fn loss_weights(&self, schema: &DatasetSchema, encoder: &FeatureEncoder) -> LossWeights {
        let mut per_feature = schema.weights();
        let mut monotonic = Vec::new();
        if self.constraints.enabled {
            for d in schema.immutable_indices() {
                per_feature[d] = self.constraints.immutable_weight;
            }
            monotonic = encoder.encoded_indices(&schema.monotonic_indices());
        }
        LossWeights { weights: encoder.expand(&per_feature), monotonic, ..self.weights.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_propagates() {
        let c = RunConfig::default().with_seed(42);
        assert_eq!([c.classifier.seed, c.flow.seed, c.train.seed, c.generation.seed], [42; 4]);
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let c = RunConfig::default().with_seed(3);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c);
        let partial: RunConfig = toml::from_str("split = 0.8\n[generation]\nm = 5\n").unwrap();
        assert_eq!((partial.split, partial.generation.m, partial.k_folds), (0.8, 5, 10));
        assert!(RunConfig { split: 1.0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { k_folds: 1, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }
}
