//! JSON run configuration shared by all command-line verbs.
//!
//! One file describes a run completely; the command line only adds the
//! output directory, a seed override and verbosity. Unknown keys are
//! rejected so typos surface as configuration errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, NoiseSpec};
use crate::error::{Error, Result};
use crate::model::{ModelKind, Params};
use crate::prior::{PriorSpec, TruncatedNormalPrior};
use crate::quadrature::QuadratureSpec;
use crate::sampler::SamplerConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Model used by the likelihood.
    pub model: ModelKind,
    /// Noise assumed by the likelihood (and used by data generation). When
    /// absent, identification takes the noise recorded with the data.
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Adaptive proposal (default) or plain isotropic random walk.
    #[serde(default = "yes")]
    pub adaptive: bool,
    /// Independent chains, run concurrently and merged after burn-in.
    #[serde(default = "one")]
    pub chains: usize,
    /// Measurement CSV; relative paths resolve against the config file.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub generate: Option<GenerateSpec>,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default = "default_level")]
    pub credible_level: f64,
    /// Strains at which the predictive response band is evaluated; defaults
    /// to 50 points from zero to the largest measured strain.
    #[serde(default)]
    pub band_strains: Option<StrainSpec>,
    #[serde(default)]
    pub prior_sweep: Option<PriorSweepSpec>,
    #[serde(default)]
    pub population: Option<PopulationSpec>,
    /// Must be true to identify with a model other than the generator's.
    #[serde(default)]
    pub allow_model_mismatch: bool,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn default_level() -> f64 {
    0.95
}

/// Strains given either as an explicit list or as an equally spaced grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrainSpec {
    List(Vec<f64>),
    Grid { start: f64, step: f64, count: usize },
}

impl StrainSpec {
    pub fn strains(&self) -> Vec<f64> {
        match self {
            StrainSpec::List(v) => v.clone(),
            StrainSpec::Grid { start, step, count } => data::strain_grid(*start, *step, *count),
        }
    }
}

/// Synthetic data from known parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    /// Generator model; defaults to the run's model.
    #[serde(default)]
    pub model: Option<ModelKind>,
    pub true_params: Vec<f64>,
    pub strains: StrainSpec,
    #[serde(default)]
    pub seed: u64,
    /// Emit the exact theoretical curve.
    #[serde(default)]
    pub zero_noise: bool,
}

/// Evenly spaced values `from ..= to` (`count` of them).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![self.from],
            n => (0..n)
                .map(|i| self.from + (self.to - self.from) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Grid of prior means and standard deviations for the linear elastic
/// model, evaluated with the first `k` measurements for each `k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSweepSpec {
    pub prior_means: Range,
    pub prior_stds: Range,
    pub counts: Vec<usize>,
}

/// Specimens with scattered parameters, each tested on the same strains.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub covariance: Vec<f64>,
    pub specimens: usize,
    pub strains: StrainSpec,
    #[serde(default)]
    pub seed: u64,
}

impl PopulationSpec {
    pub fn population(&self) -> data::SpecimenPopulation {
        data::SpecimenPopulation {
            mean: self.mean.clone(),
            covariance: self.covariance.clone(),
            count: self.specimens,
        }
    }
}

impl RunConfig {
    /// Parses a config file and resolves relative data paths against it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(d) = &cfg.data {
            if d.is_relative() {
                cfg.data = Some(base.join(d));
            }
        }
        if let Some(o) = &cfg.output {
            if o.is_relative() {
                cfg.output = Some(base.join(o));
            }
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Structural checks independent of the verb.
    pub fn validate(&self) -> Result<()> {
        if let Some(n) = &self.noise {
            n.validate_nonnegative()?;
        }
        if let Some(p) = &self.prior {
            self.prior_for(p)?;
        }
        self.sampler.validate()?;
        if self.chains == 0 {
            return Err(Error::Config("chains must be >= 1".into()));
        }
        if !(self.credible_level > 0.0 && self.credible_level <= 1.0) {
            return Err(Error::Config("credible_level must lie in (0, 1]".into()));
        }
        if let Some(q) = &self.quadrature {
            q.validate()?;
        }
        if let Some(d) = &self.data {
            if !d.is_file() {
                return Err(Error::Config(format!("data file {} does not exist", d.display())));
            }
        }
        if let Some(g) = &self.generate {
            self.generator_params(g)?;
        }
        Ok(())
    }

    fn prior_for(&self, spec: &PriorSpec) -> Result<TruncatedNormalPrior> {
        if spec.mean.len() != self.model.n_params() {
            return Err(Error::Config(format!(
                "prior mean has {} entries, {} has {} parameters",
                spec.mean.len(),
                self.model,
                self.model.n_params()
            )));
        }
        TruncatedNormalPrior::from_spec(spec)
    }

    pub fn prior(&self) -> Result<TruncatedNormalPrior> {
        let spec = self
            .prior
            .as_ref()
            .ok_or_else(|| Error::Config("a prior block is required".into()))?;
        self.prior_for(spec)
    }

    pub fn generator_params(&self, g: &GenerateSpec) -> Result<Params> {
        let p = Params::new(g.model.unwrap_or(self.model), &g.true_params)?;
        if !p.is_admissible() {
            return Err(Error::Config(format!(
                "true parameters {:?} must be nonnegative",
                g.true_params
            )));
        }
        Ok(p)
    }
}
