//! Identification runs and the experiment protocols built on them: prior
//! sensitivity sweeps, specimen heterogeneity and model mismatch.

use serde::Serialize;

use crate::data::{self, MeasurementSet, NoiseRegime, NoiseSpec, Point, SpecimenPopulation};
use crate::diagnostics::{self, BandPoint, ComponentTrace, CredibleRegion, PosteriorSummary};
use crate::error::{Error, Result};
use crate::model::{ModelKind, Params};
use crate::posterior::{AnalyticLePosterior, LogPosterior};
use crate::rng;
use crate::sampler::{self, Chain, SamplerConfig};

/// Running means that still drift by more than this fraction of a standard
/// deviation over the second half of the chain trigger a warning.
pub const FLATNESS_WARNING: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct IdentifySettings {
    pub sampler: SamplerConfig,
    pub adaptive: bool,
    pub chains: usize,
    pub credible_level: f64,
    /// Strains for the response band; empty selects 50 points up to the
    /// largest measured strain.
    pub band_strains: Vec<f64>,
}

impl Default for IdentifySettings {
    fn default() -> Self {
        IdentifySettings {
            sampler: SamplerConfig::default(),
            adaptive: true,
            chains: 1,
            credible_level: 0.95,
            band_strains: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Identification {
    pub model: ModelKind,
    /// Raw chains including burn-in.
    pub chains: Vec<Chain>,
    /// Post-burn-in samples of all chains, concatenated.
    pub retained: Chain,
    pub summary: PosteriorSummary,
    pub region: CredibleRegion,
    /// Running statistics of the first chain.
    pub traces: Vec<ComponentTrace>,
    /// Response envelope over the highest-density samples.
    pub band: Vec<BandPoint>,
    /// Closed form, when the posterior is the conjugate linear elastic one.
    pub analytic: Option<AnalyticLePosterior>,
}

impl Identification {
    pub fn is_flat(&self) -> bool {
        self.traces.iter().all(|t| t.flatness <= FLATNESS_WARNING)
    }
}

/// Samples the posterior and summarizes the result.
pub fn identify(posterior: &LogPosterior, settings: &IdentifySettings) -> Result<Identification> {
    if settings.chains == 0 {
        return Err(Error::Config("at least one chain required".into()));
    }
    let cfg = &settings.sampler;
    let chains = if settings.chains == 1 {
        let run = if settings.adaptive { sampler::run_adaptive_mh } else { sampler::run_mh };
        vec![run(posterior, cfg)?]
    } else {
        sampler::run_chains(posterior, cfg, settings.chains, settings.adaptive)?
    };
    let retained = Chain::merge(&chains, cfg.burn_in)?;
    let mut summary = diagnostics::summarize(&retained, 0)?;
    let total: usize = chains.iter().map(Chain::len).sum();
    summary.acceptance_rate = chains.iter().map(Chain::accepted).sum::<usize>() as f64 / total as f64;
    let region = diagnostics::credible_region(&retained, 0, settings.credible_level)?;
    let traces = diagnostics::convergence_trace(&chains[0]);
    for (name, t) in posterior.model().param_names().iter().zip(&traces) {
        if t.flatness > FLATNESS_WARNING {
            log::warn!(
                "running mean of {name} still drifts by {:.3} standard deviations; the chain may not have converged",
                t.flatness
            );
        }
    }

    let strains = if settings.band_strains.is_empty() {
        let top = posterior
            .data()
            .iter()
            .flat_map(|s| s.points())
            .map(|p| p.strain)
            .fold(0.0, f64::max);
        (0..50).map(|i| top * i as f64 / 49.0).collect()
    } else {
        settings.band_strains.clone()
    };
    let band = diagnostics::response_band(
        posterior.model(),
        region.hpd_indices.iter().map(|&i| retained.sample(i)),
        &strains,
    )?;

    Ok(Identification {
        model: posterior.model(),
        analytic: analytic_for(posterior)?,
        chains,
        retained,
        summary,
        region,
        traces,
        band,
    })
}

/// The conjugate closed form when the posterior admits one: linear elastic
/// model, stress-only noise.
pub fn analytic_for(posterior: &LogPosterior) -> Result<Option<AnalyticLePosterior>> {
    if posterior.model() != ModelKind::Le
        || posterior.likelihood().noise().regime() != NoiseRegime::StressOnly
    {
        return Ok(None);
    }
    let s_noise = posterior.likelihood().noise().stress_std();
    let prior = posterior.prior();
    Ok(Some(AnalyticLePosterior::from_points(
        prior.mean()[0],
        prior.covariance()[(0, 0)].sqrt(),
        s_noise,
        posterior.data().iter().flat_map(|s| s.points()),
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub prior_mean: f64,
    pub prior_std: f64,
    pub map: f64,
}

/// Conjugate MAP of Young's modulus for every prior `(mean, std)` on the
/// grid, using the first `k` measurements for each `k` in `counts`.
pub fn prior_sweep(
    points: &[Point],
    s_noise: f64,
    means: &[f64],
    stds: &[f64],
    counts: &[usize],
) -> Result<Vec<SweepRow>> {
    if let Some(&k) = counts.iter().find(|&&k| k > points.len()) {
        return Err(Error::Config(format!(
            "sweep asks for {k} measurements, data has {}",
            points.len()
        )));
    }
    if !(s_noise > 0.0) {
        return Err(Error::Config("noise level must be positive".into()));
    }
    if stds.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Config("prior standard deviations must be positive".into()));
    }
    let mut rows = Vec::with_capacity(counts.len() * means.len() * stds.len());
    for &k in counts {
        for &m in means {
            for &s in stds {
                let post = AnalyticLePosterior::from_points(m, s, s_noise, &points[..k]);
                rows.push(SweepRow {
                    k,
                    prior_mean: m,
                    prior_std: s,
                    map: post.mean,
                });
            }
        }
    }
    Ok(rows)
}

/// Max-minus-min MAP over the grid for each `k`, in the order of `counts`.
pub fn map_spread(rows: &[SweepRow], counts: &[usize]) -> Vec<(usize, f64)> {
    counts
        .iter()
        .map(|&k| {
            let (lo, hi) = rows
                .iter()
                .filter(|r| r.k == k)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.map), hi.max(r.map)));
            (k, hi - lo)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Heterogeneity {
    pub specimens: Vec<Params>,
    pub data: Vec<MeasurementSet>,
    pub identification: Identification,
    pub population_std: Vec<f64>,
    /// Correlation of the first two parameters, when there are two.
    pub population_correlation: Option<f64>,
    pub posterior_correlation: Option<f64>,
}

impl Heterogeneity {
    /// Posterior over population standard deviation, per parameter.
    pub fn std_ratios(&self) -> Vec<f64> {
        self.identification
            .summary
            .std
            .iter()
            .zip(&self.population_std)
            .map(|(p, q)| if *q > 0.0 { p / q } else { f64::NAN })
            .collect()
    }
}

/// Draws specimens, generates one data set per specimen and identifies a
/// single parameter vector from all of them together.
///
/// Specimen `j` uses data seed `child_seed(seed, j)`.
pub fn heterogeneity(
    population: &SpecimenPopulation,
    strains: &[f64],
    noise: &NoiseSpec,
    seed: u64,
    prior: crate::prior::TruncatedNormalPrior,
    likelihood: crate::likelihood::LikelihoodSpec,
    settings: &IdentifySettings,
) -> Result<Heterogeneity> {
    let model = likelihood.model();
    let specimens = data::draw_specimens(population, model, seed)?;
    let data = specimens
        .iter()
        .enumerate()
        .map(|(j, p)| data::generate(p, strains, noise, rng::child_seed(seed, j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let posterior = LogPosterior::pooled(prior, likelihood, data.clone())?;
    let identification = identify(&posterior, settings)?;

    let n = population.mean.len();
    let population_std = (0..n).map(|j| population.covariance[j * n + j].sqrt()).collect::<Vec<_>>();
    let corr = |cov: &[f64]| {
        (n >= 2).then(|| {
            let d = (cov[0] * cov[n + 1]).sqrt();
            if d > 0.0 { cov[1] / d } else { f64::NAN }
        })
    };
    Ok(Heterogeneity {
        population_correlation: corr(&population.covariance),
        posterior_correlation: corr(&identification.summary.covariance),
        specimens,
        data,
        identification,
        population_std,
    })
}

/// Refuses to identify with a model other than the generator's unless
/// explicitly allowed.
pub fn check_model_match(generator: ModelKind, model: ModelKind, allow_mismatch: bool) -> Result<()> {
    if generator != model && !allow_mismatch {
        return Err(Error::Config(format!(
            "data generated with {generator} but identified with {model}; \
             set allow_model_mismatch to run deliberately mismatched models"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_dogmatic_prior_returns_prior_mean() {
        let pts = [Point { strain: 1e-3, stress: 0.21 }];
        let rows = prior_sweep(&pts, 0.01, &[150.0], &[1e-9], &[1]).unwrap();
        assert!((rows[0].map - 150.0).abs() < 1e-6);
        assert!(prior_sweep(&pts, 0.01, &[150.0], &[10.0], &[2]).is_err());
    }

    #[test]
    fn spread_per_count() {
        let rows = [
            SweepRow { k: 1, prior_mean: 0.0, prior_std: 1.0, map: 3.0 },
            SweepRow { k: 1, prior_mean: 0.0, prior_std: 1.0, map: 5.0 },
            SweepRow { k: 2, prior_mean: 0.0, prior_std: 1.0, map: 4.0 },
        ];
        assert_eq!(map_spread(&rows, &[1, 2]), vec![(1, 2.0), (2, 0.0)]);
    }

    #[test]
    fn mismatch_requires_flag() {
        assert!(check_model_match(ModelKind::LeNh, ModelKind::LePp, false).is_err());
        assert!(check_model_match(ModelKind::LeNh, ModelKind::LePp, true).is_ok());
        assert!(check_model_match(ModelKind::Le, ModelKind::Le, false).is_ok());
    }
}
