//! Posterior summaries computed from a chain: moments, MAP, credible
//! regions, running-mean convergence traces, predictive response bands and
//! effective sample sizes.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::ModelKind;
use crate::sampler::Chain;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    /// Row-major, normalized by the number of retained samples.
    pub covariance: Vec<f64>,
    pub std: Vec<f64>,
    pub map: Vec<f64>,
    pub map_log_density: f64,
    pub acceptance_rate: f64,
    pub retained: usize,
    pub effective_sample_size: Vec<f64>,
}

fn retained(chain: &Chain, burn_in: usize) -> Result<std::ops::Range<usize>> {
    if burn_in >= chain.len() {
        return Err(Error::Config(format!(
            "burn-in {burn_in} leaves no samples from a chain of {}",
            chain.len()
        )));
    }
    Ok(burn_in..chain.len())
}

fn moments(chain: &Chain, range: std::ops::Range<usize>) -> (Vec<f64>, Vec<f64>) {
    let n = chain.dim();
    let count = range.len() as f64;
    let mut mean = vec![0.0; n];
    for i in range.clone() {
        for (m, v) in mean.iter_mut().zip(chain.sample(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut cov = vec![0.0; n * n];
    for i in range {
        let s = chain.sample(i);
        for r in 0..n {
            for c in 0..n {
                cov[r * n + c] += (s[r] - mean[r]) * (s[c] - mean[c]);
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= count);
    (mean, cov)
}

/// Mean, covariance and MAP of the samples after `burn_in`.
///
/// The MAP is the retained sample with the largest stored log-density;
/// ties go to the earliest.
pub fn summarize(chain: &Chain, burn_in: usize) -> Result<PosteriorSummary> {
    let range = retained(chain, burn_in)?;
    let n = chain.dim();
    let (mean, covariance) = moments(chain, range.clone());
    let mut best = range.start;
    for i in range.clone() {
        if chain.log_densities()[i] > chain.log_densities()[best] {
            best = i;
        }
    }
    let effective_sample_size = (0..n)
        .map(|j| effective_sample_size(&chain.component(j)[range.clone()]))
        .collect();
    Ok(PosteriorSummary {
        std: (0..n).map(|j| covariance[j * n + j].sqrt()).collect(),
        mean,
        covariance,
        map: chain.sample(best).to_vec(),
        map_log_density: chain.log_densities()[best],
        acceptance_rate: chain.acceptance_rate(),
        retained: range.len(),
        effective_sample_size,
    })
}

/// Gaussian approximation `{x : (x − μ)ᵀ Σ⁻¹ (x − μ) ≤ threshold}`.
#[derive(Clone, Debug, Serialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    pub covariance: Vec<f64>,
    /// χ² quantile of the credible level.
    pub threshold: f64,
    #[serde(skip)]
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
}

impl Ellipsoid {
    pub fn mahalanobis_squared(&self, x: &[f64]) -> f64 {
        let chol = self.chol.as_ref().expect("ellipsoid built with a factor");
        let mut d = DVector::from_iterator(x.len(), x.iter().zip(&self.center).map(|(a, b)| a - b));
        chol.l_dirty().solve_lower_triangular_mut(&mut d);
        d.norm_squared()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.mahalanobis_squared(x) <= self.threshold
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CredibleRegion {
    pub level: f64,
    /// Absent when the sample covariance is singular.
    pub ellipsoid: Option<Ellipsoid>,
    /// Samples with log-density at or above this value form the
    /// highest-density set.
    pub hpd_log_density_threshold: f64,
    /// Indices (into the full chain) of the highest-density samples.
    #[serde(skip)]
    pub hpd_indices: Vec<usize>,
}

/// Credible region at `level` from the post-burn-in samples, as a Gaussian
/// ellipsoid and as a highest-posterior-density sample set.
pub fn credible_region(chain: &Chain, burn_in: usize, level: f64) -> Result<CredibleRegion> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Config(format!("credible level {level} must lie in (0, 1]")));
    }
    let range = retained(chain, burn_in)?;
    let n = chain.dim();
    let (mean, cov) = moments(chain, range.clone());
    let ellipsoid = Cholesky::new(DMatrix::from_row_slice(n, n, &cov)).and_then(|chol| {
        let l = chol.l_dirty();
        if (0..n).any(|j| !(l[(j, j)] * l[(j, j)] > 1e-14 * cov[j * n + j])) {
            return None;
        }
        let threshold = if level == 1.0 {
            f64::INFINITY
        } else {
            ChiSquared::new(n as f64).ok()?.inverse_cdf(level)
        };
        Some(Ellipsoid {
            center: mean.clone(),
            covariance: cov.clone(),
            threshold,
            chol: Some(chol),
        })
    });

    let mut lds: Vec<f64> = chain.log_densities()[range.clone()].to_vec();
    lds.sort_by(f64::total_cmp);
    // Keep the top ⌈level·M⌉ samples.
    let keep = ((level * lds.len() as f64).ceil() as usize).clamp(1, lds.len());
    let threshold = lds[lds.len() - keep];
    let hpd_indices = range
        .filter(|&i| chain.log_densities()[i] >= threshold)
        .collect();
    Ok(CredibleRegion {
        level,
        ellipsoid,
        hpd_log_density_threshold: threshold,
        hpd_indices,
    })
}

/// Running mean and standard deviation of one component over the chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentTrace {
    pub running_mean: Vec<f64>,
    pub running_std: Vec<f64>,
    /// Largest drift of the running mean over the second half of the chain,
    /// relative to the final standard deviation; 0 for a constant chain.
    pub flatness: f64,
}

pub fn convergence_trace(chain: &Chain) -> Vec<ComponentTrace> {
    (0..chain.dim())
        .map(|j| component_trace(&chain.component(j)))
        .collect()
}

fn component_trace(xs: &[f64]) -> ComponentTrace {
    let mut running_mean = Vec::with_capacity(xs.len());
    let mut running_std = Vec::with_capacity(xs.len());
    // Welford updates.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let k = (i + 1) as f64;
        let delta = x - mean;
        mean += delta / k;
        m2 += delta * (x - mean);
        running_mean.push(mean);
        running_std.push((m2 / k).max(0.0).sqrt());
    }
    let flatness = match (running_mean.last(), running_std.last()) {
        (Some(&last), Some(&sd)) if sd > 0.0 => {
            let half = &running_mean[running_mean.len() / 2..];
            half.iter().map(|m| (m - last).abs()).fold(0.0, f64::max) / sd
        }
        _ => 0.0,
    };
    ComponentTrace {
        running_mean,
        running_std,
        flatness,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandPoint {
    pub strain: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Pointwise minimum and maximum of the predicted stress over `samples`.
pub fn response_band<'a>(
    model: ModelKind,
    samples: impl IntoIterator<Item = &'a [f64]>,
    strains: &[f64],
) -> Result<Vec<BandPoint>> {
    let mut band: Vec<BandPoint> = strains
        .iter()
        .map(|&strain| BandPoint {
            strain,
            lower: f64::INFINITY,
            upper: f64::NEG_INFINITY,
        })
        .collect();
    let mut any = false;
    for x in samples {
        any = true;
        for b in &mut band {
            let s = model.stress(b.strain, x)?;
            b.lower = b.lower.min(s);
            b.upper = b.upper.max(s);
        }
    }
    if !any {
        return Err(Error::Config("response band needs at least one sample".into()));
    }
    Ok(band)
}

/// Effective sample size by Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m < 4 {
        return m as f64;
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    let centred: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let c0 = centred.iter().map(|d| d * d).sum::<f64>() / m as f64;
    if c0 == 0.0 {
        return m as f64;
    }
    let acf = |lag: usize| -> f64 {
        centred[..m - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / m as f64
            / c0
    };
    // Sum of consecutive autocorrelation pairs while positive, forced to be
    // nonincreasing.
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < m {
        let mut pair = acf(2 * k) + acf(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        prev = pair;
        tau += 2.0 * pair;
        k += 1;
    }
    (m as f64 / tau.max(1.0 / m as f64)).min(m as f64)
}
