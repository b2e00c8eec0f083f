//! Bayesian identification of elastoplastic material parameters from noisy
//! uniaxial tensile measurements.
//!
//! The crate provides four one-dimensional constitutive laws ([`model`]),
//! synthetic data generation ([`data`]), truncated normal priors
//! ([`prior`]), likelihoods for stress-only and stress-and-strain noise
//! ([`likelihood`]), unnormalized posteriors ([`posterior`]), standard and
//! adaptive Metropolis-Hastings samplers ([`sampler`]) and chain summaries
//! ([`diagnostics`]).

pub mod cli;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod likelihood;
pub mod model;
pub mod posterior;
pub mod prior;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod special;

pub use data::{MeasurementSet, NoiseRegime, NoiseSpec, Point};
pub use error::{Error, Result};
pub use likelihood::LikelihoodSpec;
pub use model::{ModelKind, Params};
pub use posterior::{AnalyticLePosterior, LogDensity, LogPosterior};
pub use prior::TruncatedNormalPrior;
pub use quadrature::QuadratureSpec;
pub use sampler::{Chain, SamplerConfig};
