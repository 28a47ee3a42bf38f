//! TOML configuration for the whole workflow.
//!
//! ```toml
//! [mgk]
//! q = 0.05
//! delta_degree = 0.9
//!
//! [gpr]
//! al_noise = 1e-4
//! regression_noise = 1e-2
//! temperature_length_scale = 50.0
//!
//! [al]
//! thresholds = [0.5, 0.4, 0.3]
//! batch = 1000
//! seed = 42
//! checkpoint_every = 50
//!
//! [pipeline]
//! min_carbons = 4
//! max_carbons = 12
//! n_test = 200
//! out_dir = "alms-out"
//! ```
//!
//! Every key is optional and falls back to the defaults below; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mgk::MgkHyperparameters;
use crate::molspace::MAX_CARBONS_LIMIT;

/// Noise levels and the temperature length scale of the composite kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GprConfig {
    /// Noise variance used when scoring uncertainty during selection.
    pub al_noise: f64,
    /// Noise variance for property regression on standardized targets.
    pub regression_noise: f64,
    /// K.
    pub temperature_length_scale: f64,
}

impl Default for GprConfig {
    fn default() -> Self {
        GprConfig {
            al_noise: 1e-4,
            regression_noise: 1e-2,
            temperature_length_scale: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlConfig {
    /// Uncertainty thresholds of successive stages, strictly decreasing.
    pub thresholds: Vec<f64>,
    /// Pool molecules scored per iteration.
    pub batch: usize,
    pub seed: u64,
    /// Iterations between checkpoints; 0 writes only at stage ends.
    pub checkpoint_every: u64,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            thresholds: vec![0.5],
            batch: 1000,
            seed: 42,
            checkpoint_every: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub min_carbons: usize,
    pub max_carbons: usize,
    /// Relative noise of the synthetic oracle.
    pub noise_sigma: f64,
    pub oracle_seed: u64,
    pub split_seed: u64,
    /// Held-out molecules for evaluation.
    pub n_test: usize,
    /// Seeds of the active-learning versus random-sampling comparison.
    pub compare_seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            min_carbons: 4,
            max_carbons: 12,
            noise_sigma: 0.0,
            oracle_seed: 42,
            split_seed: 42,
            n_test: 200,
            compare_seeds: vec![1, 2, 3, 4, 5],
            out_dir: PathBuf::from("alms-out"),
        }
    }
}

/// The complete configuration document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mgk: MgkHyperparameters,
    pub gpr: GprConfig,
    pub al: AlConfig,
    pub pipeline: ExperimentConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Sets every seed to `seed`. Each consumer derives its own stream, so
    /// equal seeds do not correlate the stages.
    pub fn override_seed(&mut self, seed: u64) {
        self.al.seed = seed;
        self.pipeline.oracle_seed = seed;
        self.pipeline.split_seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        self.mgk.validate()?;
        let g = &self.gpr;
        for (name, v) in [("al_noise", g.al_noise), ("regression_noise", g.regression_noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return cfg(format!("gpr.{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(g.temperature_length_scale > 0.0 && g.temperature_length_scale.is_finite()) {
            return cfg("gpr.temperature_length_scale must be positive".into());
        }
        let al = &self.al;
        if al.thresholds.is_empty() {
            return cfg("al.thresholds must not be empty".into());
        }
        if let Some(t) = al.thresholds.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return cfg(format!("al.thresholds entries must be finite and non-negative, got {t}"));
        }
        if al.thresholds.windows(2).any(|w| !(w[1] < w[0])) {
            return cfg("al.thresholds must be strictly decreasing".into());
        }
        if al.batch == 0 {
            return cfg("al.batch must be at least 1".into());
        }
        let p = &self.pipeline;
        if p.min_carbons == 0 || p.min_carbons > p.max_carbons {
            return cfg(format!(
                "pipeline carbon range {}..={} is empty",
                p.min_carbons, p.max_carbons
            ));
        }
        if p.max_carbons > MAX_CARBONS_LIMIT {
            return cfg(format!(
                "pipeline.max_carbons {} exceeds the limit {MAX_CARBONS_LIMIT}",
                p.max_carbons
            ));
        }
        if !(p.noise_sigma >= 0.0 && p.noise_sigma.is_finite()) {
            return cfg("pipeline.noise_sigma must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// Short hex digest of a serializable value, prefixed by `label`.
pub fn content_hash<T: Serialize>(label: &str, value: &T) -> String {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        value: &'a T,
    }
    let text = toml::to_string(&Wrapped { value }).expect("hashed value serializes to TOML");
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update([0]);
    h.update(text.as_bytes());
    hex::encode(&h.finalize()[..6])
}

/// Independent 64-bit seed for the named consumer of `seed`.
pub fn stream_seed(seed: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 8 bytes"))
}
