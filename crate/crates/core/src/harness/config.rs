//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub target: TargetConfig,
    #[serde(default)]
    pub flatten: FlattenConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PrecisionConfig {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetConfig {
    Mixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        precisions: Vec<PrecisionConfig>,
        /// `gaumix` (default), `hessian` or `outside_ball`.
        #[serde(default)]
        profile: Option<String>,
    },
    Bnn {
        /// `[inputs, hidden…, classes]`.
        layers: Vec<usize>,
        #[serde(default = "tanh")]
        activation: String,
        alpha1: f64,
        alpha2: f64,
        /// Defaults to `1/classes`.
        #[serde(default)]
        beta: Option<f64>,
        dataset: DatasetConfig,
    },
    Sewn {
        d: usize,
        m0: f64,
        kappa: f64,
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
    Angular {
        d: usize,
        m1: f64,
        kappa: f64,
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
}

fn tanh() -> String {
    "tanh".into()
}

/// Either a CSV file (features then a zero-based label per row) or a
/// synthetic set with standard normal features and uniform labels.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlattenConfig {
    #[serde(default = "a1")]
    pub rule: String,
    #[serde(default)]
    pub m_override: Option<f64>,
    #[serde(default = "quad_tol")]
    pub quad_tol: f64,
}

fn a1() -> String {
    "a1".into()
}

fn quad_tol() -> f64 {
    1e-10
}

impl Default for FlattenConfig {
    fn default() -> Self {
        Self {
            rule: a1(),
            m_override: None,
            quad_tol: quad_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Mala,
    Ula,
    Rejection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    #[serde(default)]
    pub step: Option<f64>,
    /// Steps per chain, or draws in total for `rejection`.
    pub steps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default = "one")]
    pub chains: usize,
    /// Chains start at `N(0, init_scale² I)`; `0` starts them at the origin.
    #[serde(default)]
    pub init_scale: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeMethod {
    #[default]
    BatchMeans,
    Bootstrap,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub se: SeMethod,
    #[serde(default = "batches")]
    pub batches: usize,
    #[serde(default = "resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub functions: Vec<ObservableConfig>,
}

fn batches() -> usize {
    20
}

fn resamples() -> usize {
    200
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            se: SeMethod::default(),
            batches: batches(),
            bootstrap_resamples: resamples(),
            functions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObservableConfig {
    /// `exp(−|x − center|²/(2 width²))`.
    Bump {
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        name: Option<String>,
    },
    /// `x[index]`.
    Coordinate {
        index: usize,
        #[serde(default)]
        name: Option<String>,
    },
    /// `coefficients·x + offset`.
    Affine {
        coefficients: Vec<f64>,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        name: Option<String>,
    },
    /// `1{x[index] ≤ threshold}`.
    Indicator {
        index: usize,
        threshold: f64,
        #[serde(default)]
        name: Option<String>,
    },
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative data paths are resolved against the config's directory.
        if let TargetConfig::Bnn { dataset, .. } = &mut cfg.target {
            if let (Some(p), Some(dir)) = (&dataset.path, path.parent()) {
                if p.is_relative() {
                    dataset.path = Some(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        let s = &self.sampler;
        if s.chains == 0 || s.thin == 0 {
            return bad("sampler.chains and sampler.thin must be at least 1");
        }
        if s.kind != SamplerKind::Rejection {
            match s.step {
                Some(h) if h > 0.0 && h.is_finite() => {}
                _ => return bad("sampler.step must be a positive number for mala and ula"),
            }
            if s.steps <= s.burn_in {
                return bad("sampler.steps must exceed sampler.burn_in");
            }
        } else if s.steps < 2 {
            return bad("rejection sampling needs at least two draws");
        }
        if !(s.init_scale >= 0.0) {
            return bad("sampler.init_scale must be non-negative");
        }
        if !(self.flatten.quad_tol > 0.0) {
            return bad("flatten.quad_tol must be positive");
        }
        if self.estimator.batches < 2 && self.estimator.se == SeMethod::BatchMeans && s.chains < 2 {
            return bad("batch means need at least two batches");
        }
        if let TargetConfig::Bnn { dataset, .. } = &self.target {
            if dataset.path.is_none() == dataset.size.is_none() {
                return bad("dataset needs exactly one of `path` and `size`");
            }
        }
        Ok(())
    }
}
