//! Unnormalized log-posteriors and the conjugate linear-elastic posterior.

use crate::data::{MeasurementSet, NoiseRegime, Point};
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodSpec;
use crate::model::ModelKind;
use crate::prior::TruncatedNormalPrior;

/// Anything the samplers can explore: a log-density over `R^dim` that is
/// `−∞` outside its support.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> Result<f64>;

    /// Where a chain starts when no initial sample is configured.
    fn default_start(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Prior times likelihood for one or more independent measurement sets.
#[derive(Clone, Debug)]
pub struct LogPosterior {
    prior: TruncatedNormalPrior,
    likelihood: LikelihoodSpec,
    data: Vec<MeasurementSet>,
}

impl LogPosterior {
    pub fn new(prior: TruncatedNormalPrior, likelihood: LikelihoodSpec, data: MeasurementSet) -> Result<Self> {
        Self::pooled(prior, likelihood, vec![data])
    }

    /// Posterior given several specimens' data sets treated as independent
    /// measurements of one parameter vector. An empty list gives the prior.
    pub fn pooled(
        prior: TruncatedNormalPrior,
        likelihood: LikelihoodSpec,
        data: Vec<MeasurementSet>,
    ) -> Result<Self> {
        let n = likelihood.model().n_params();
        if prior.dim() != n {
            return Err(Error::Config(format!(
                "prior has dimension {}, {} needs {n}",
                prior.dim(),
                likelihood.model()
            )));
        }
        for set in &data {
            likelihood.check_data(set)?;
        }
        Ok(LogPosterior {
            prior,
            likelihood,
            data,
        })
    }

    pub fn prior(&self) -> &TruncatedNormalPrior {
        &self.prior
    }

    pub fn likelihood(&self) -> &LikelihoodSpec {
        &self.likelihood
    }

    pub fn data(&self) -> &[MeasurementSet] {
        &self.data
    }

    pub fn model(&self) -> ModelKind {
        self.likelihood.model()
    }

    /// `log π(x) + Σ log π(dᵢ | x)`; `−∞` off the prior support, where the
    /// likelihood is never evaluated.
    pub fn log_posterior(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.prior.dim() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                self.prior.dim(),
                x.len()
            )));
        }
        let lp = self.prior.log_density(x);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        let mut total = lp;
        for set in &self.data {
            total += self
                .likelihood
                .log_likelihood_points(x, set.points())
                .map_err(|e| match e {
                    Error::Numerical(m) => Error::Numerical(format!("posterior at {x:?}: {m}")),
                    other => other,
                })?;
        }
        Ok(total)
    }
}

impl LogDensity for LogPosterior {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.log_posterior(x)
    }

    fn default_start(&self) -> Option<Vec<f64>> {
        Some(self.prior.mean().to_vec())
    }
}

/// Closed-form posterior of Young's modulus for the linear elastic model
/// with a normal prior and stress-only noise.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct AnalyticLePosterior {
    pub mean: f64,
    pub std: f64,
}

impl AnalyticLePosterior {
    /// Posterior from the prior `N(prior_mean, prior_std²)` and readings
    /// with noise level `s_noise`. The nonnegativity truncation is not
    /// applied; see [`truncation_mass`](Self::truncation_mass).
    pub fn from_points<'a>(
        prior_mean: f64,
        prior_std: f64,
        s_noise: f64,
        points: impl IntoIterator<Item = &'a Point>,
    ) -> Self {
        let (sxy, sxx) = points
            .into_iter()
            .fold((0.0, 0.0), |(sxy, sxx), p| (sxy + p.strain * p.stress, sxx + p.strain * p.strain));
        let (vn, ve) = (s_noise * s_noise, prior_std * prior_std);
        let denom = vn + ve * sxx;
        AnalyticLePosterior {
            mean: (vn * prior_mean + ve * sxy) / denom,
            std: (vn * ve / denom).sqrt(),
        }
    }

    /// Posterior for stress-only data sets; fails for other regimes.
    pub fn new(prior_mean: f64, prior_std: f64, data: &[MeasurementSet]) -> Result<Self> {
        let mut s_noise = None;
        for set in data {
            if set.noise().regime() != NoiseRegime::StressOnly {
                return Err(Error::Config(
                    "the conjugate posterior requires stress-only noise".into(),
                ));
            }
            let s = set.noise().stress_std();
            if s_noise.is_some_and(|prev| prev != s) {
                return Err(Error::Config("data sets disagree on the noise level".into()));
            }
            s_noise = Some(s);
        }
        let s_noise = match s_noise {
            Some(s) => s,
            None => return Ok(AnalyticLePosterior { mean: prior_mean, std: prior_std }),
        };
        Ok(Self::from_points(
            prior_mean,
            prior_std,
            s_noise,
            data.iter().flat_map(|s| s.points()),
        ))
    }

    /// Probability mass of the untruncated posterior below `E = 0`.
    pub fn truncation_mass(&self) -> f64 {
        0.5 * statrs::function::erf::erfc(self.mean / self.std / std::f64::consts::SQRT_2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NoiseSpec;

    fn single_point() -> MeasurementSet {
        MeasurementSet::new(
            vec![Point { strain: 7.25e-4, stress: 0.1576 }],
            NoiseSpec::stress_only(0.01),
            "",
        )
        .unwrap()
    }

    #[test]
    fn single_point_posterior() {
        let a = AnalyticLePosterior::new(150.0, 50.0, &[single_point()]).unwrap();
        // Hand arithmetic: (1e-4·150 + 2500·1.1426e-4) / (1e-4 + 2500·5.25625e-7)
        assert!((a.mean - 212.614_364_640_884).abs() < 1e-9);
        assert!((a.std - 13.296_449_906_290_674).abs() < 1e-9);
        assert!(a.truncation_mass() < 1e-50);
    }

    #[test]
    fn no_data_returns_prior() {
        let a = AnalyticLePosterior::new(150.0, 50.0, &[]).unwrap();
        assert_eq!((a.mean, a.std), (150.0, 50.0));
    }

    #[test]
    fn flat_prior_limit_is_least_squares() {
        let pts = [Point { strain: 1e-3, stress: 0.2 }, Point { strain: 2e-3, stress: 0.43 }];
        let a = AnalyticLePosterior::from_points(0.0, 1e9, 0.01, &pts);
        let ls = (1e-3 * 0.2 + 2e-3 * 0.43) / (1e-6 + 4e-6);
        assert!((a.mean - ls).abs() < 1e-6);
    }

    #[test]
    fn zero_strain_point_carries_no_information() {
        let base = [Point { strain: 1e-3, stress: 0.2 }];
        let extra = [Point { strain: 1e-3, stress: 0.2 }, Point { strain: 0.0, stress: 0.05 }];
        let a = AnalyticLePosterior::from_points(150.0, 50.0, 0.01, &base);
        let b = AnalyticLePosterior::from_points(150.0, 50.0, 0.01, &extra);
        assert_eq!(a, b);
    }

    #[test]
    fn batch_equals_sequential() {
        let pts: Vec<Point> = (1..=5)
            .map(|i| Point { strain: 2e-4 * i as f64, stress: 0.042 * i as f64 + 0.003 })
            .collect();
        let batch = AnalyticLePosterior::from_points(150.0, 50.0, 0.01, &pts);
        let mut seq = AnalyticLePosterior { mean: 150.0, std: 50.0 };
        for p in &pts {
            seq = AnalyticLePosterior::from_points(seq.mean, seq.std, 0.01, std::iter::once(p));
        }
        assert!((batch.mean - seq.mean).abs() < 1e-10);
        assert!((batch.std - seq.std).abs() < 1e-10);
    }

    #[test]
    fn posterior_off_support_and_empty() {
        let prior = TruncatedNormalPrior::diagonal(&[150.0], &[50.0]).unwrap();
        let lik = LikelihoodSpec::new(ModelKind::Le, NoiseSpec::stress_only(0.01)).unwrap();
        let post = LogPosterior::pooled(prior.clone(), lik, vec![]).unwrap();
        assert_eq!(post.log_posterior(&[-1.0]).unwrap(), f64::NEG_INFINITY);
        for e in [0.0, 100.0, 250.0] {
            assert_eq!(post.log_posterior(&[e]).unwrap(), prior.log_density(&[e]));
        }
    }

    #[test]
    fn grid_argmax_matches_conjugate_mean() {
        let prior = TruncatedNormalPrior::diagonal(&[150.0], &[50.0]).unwrap();
        let lik = LikelihoodSpec::new(ModelKind::Le, NoiseSpec::stress_only(0.01)).unwrap();
        let post = LogPosterior::new(prior, lik, single_point()).unwrap();
        let step = 1e-3;
        let best = (0..300_000)
            .map(|i| 100.0 + step * i as f64)
            .max_by(|a, b| {
                post.log_posterior(&[*a]).unwrap().total_cmp(&post.log_posterior(&[*b]).unwrap())
            })
            .unwrap();
        let a = AnalyticLePosterior::new(150.0, 50.0, &[single_point()]).unwrap();
        assert!((best - a.mean).abs() <= step);
    }

    #[test]
    fn regime_mismatch_rejected() {
        let prior = TruncatedNormalPrior::diagonal(&[150.0], &[50.0]).unwrap();
        let lik = LikelihoodSpec::new(ModelKind::Le, NoiseSpec::stress_and_strain(0.01, 1e-4)).unwrap();
        assert!(matches!(LogPosterior::new(prior, lik, single_point()), Err(Error::Config(_))));
    }
}
