//! Log-likelihoods of measurement sets for every model and noise regime.
//!
//! With exact strains each reading contributes a Gaussian residual term.
//! With noisy strains the true strain is integrated out,
//!
//! ```text
//! π(σᵐ | x, εᵐ) = 1/(2π S_σ S_ε) ∫₀ᵃ exp(−(σᵐ − σ(ε, x))²/(2S_σ²) − (εᵐ − ε)²/(2S_ε²)) dε
//! ```
//!
//! On every branch where `σ(ε, x)` is affine in `ε` the integrand is a
//! Gaussian in `ε`, so each branch reduces to a normal interval probability
//! (see [`log_affine_branch`]). The nonlinear-hardening branch has no closed
//! form and is integrated with composite Simpson.
//!
//! For nonlinear hardening the deterministic stress is introduced through a
//! delta function of the implicit hardening equation, which divides the
//! plastic density by `|dg/dσ| = 1 + (Hn/E)(ε − σ/E)^(n−1)`. That factor is
//! on by default and can be disabled with
//! [`LikelihoodSpec::without_hardening_jacobian`].
//!
//! Every value is a normalized log-density including the Gaussian constants.

use std::f64::consts::PI;

use crate::data::{MeasurementSet, NoiseSpec, Point};
use crate::error::{Error, Result};
use crate::model::{self, ModelKind};
use crate::quadrature::{log_simpson, QuadratureSpec};
use crate::special::{log_add_exp, log_normal_interval};

/// Model, noise model and (for nonlinear hardening under strain noise) the
/// quadrature used to evaluate the likelihood.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikelihoodSpec {
    model: ModelKind,
    noise: NoiseSpec,
    quadrature: Option<QuadratureSpec>,
    hardening_jacobian: bool,
}

impl LikelihoodSpec {
    pub fn new(model: ModelKind, noise: NoiseSpec) -> Result<Self> {
        noise.validate()?;
        let quadrature = needs_quadrature(model, &noise).then(QuadratureSpec::default);
        Ok(LikelihoodSpec {
            model,
            noise,
            quadrature,
            hardening_jacobian: true,
        })
    }

    /// Replaces the default quadrature; only meaningful for LE-NH with
    /// strain noise.
    pub fn with_quadrature(mut self, q: QuadratureSpec) -> Result<Self> {
        if !needs_quadrature(self.model, &self.noise) {
            return Err(Error::Config(format!(
                "quadrature settings only apply to LE-NH with strain noise, not {} / {:?}",
                self.model,
                self.noise.regime()
            )));
        }
        q.validate()?;
        self.quadrature = Some(q);
        Ok(self)
    }

    /// Drops the `1/|dg/dσ|` change-of-variables factor from the
    /// nonlinear-hardening likelihood, so that `n = 1` coincides with linear
    /// hardening.
    pub fn without_hardening_jacobian(mut self) -> Self {
        self.hardening_jacobian = false;
        self
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn quadrature(&self) -> Option<&QuadratureSpec> {
        self.quadrature.as_ref()
    }

    pub fn hardening_jacobian(&self) -> bool {
        self.hardening_jacobian
    }

    /// Checks that `set` was recorded under the regime this likelihood models.
    pub fn check_data(&self, set: &MeasurementSet) -> Result<()> {
        if set.noise().regime() != self.noise.regime() {
            return Err(Error::Config(format!(
                "data recorded with {:?} noise cannot be analysed with a {:?} likelihood",
                set.noise().regime(),
                self.noise.regime()
            )));
        }
        Ok(())
    }

    /// Sum of per-point log-likelihoods.
    pub fn log_likelihood(&self, x: &[f64], set: &MeasurementSet) -> Result<f64> {
        self.check_data(set)?;
        self.log_likelihood_points(x, set.points())
    }

    /// Like [`log_likelihood`](Self::log_likelihood) without the regime check.
    pub fn log_likelihood_points(&self, x: &[f64], points: &[Point]) -> Result<f64> {
        if x.len() != self.model.n_params() {
            return Err(Error::Config(format!(
                "{} expects {} parameters, got {}",
                self.model,
                self.model.n_params(),
                x.len()
            )));
        }
        // Fixed-order reduction keeps results bit-stable.
        points.iter().try_fold(0.0, |acc, p| Ok(acc + self.log_point(x, p)?))
    }

    /// Log-likelihood of a single measurement.
    pub fn log_point(&self, x: &[f64], p: &Point) -> Result<f64> {
        match self.noise {
            NoiseSpec::StressOnly { s_noise } => {
                log_point_single(self.model, x, p, s_noise, self.hardening_jacobian)
            }
            NoiseSpec::StressAndStrain {
                s_stress, s_strain, ..
            } => {
                let a = self.noise.upper_bound();
                let noise = StrainNoise {
                    s_stress,
                    s_strain,
                    upper: a,
                };
                match self.model {
                    ModelKind::Le => Ok(log_point_double_le(x[0], p, &noise)),
                    ModelKind::LePp => log_point_double_lepp(x[0], x[1], p, &noise),
                    ModelKind::LeLh => log_point_double_lelh(x[0], x[1], x[2], p, &noise),
                    ModelKind::LeNh => log_point_double_lenh(
                        x,
                        p,
                        &noise,
                        self.quadrature.unwrap_or_default(),
                        self.hardening_jacobian,
                    ),
                }
            }
        }
    }
}

fn needs_quadrature(model: ModelKind, noise: &NoiseSpec) -> bool {
    model == ModelKind::LeNh && matches!(noise, NoiseSpec::StressAndStrain { .. })
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn log_point_single(model: ModelKind, x: &[f64], p: &Point, s: f64, jacobian: bool) -> Result<f64> {
    if model == ModelKind::LeNh {
        let st = model::state_lenh(p.strain, x[0], x[1], x[2], x[3])?;
        let r = (p.stress - st.stress) / s;
        let mut v = -0.5 * r * r - s.ln() - LN_SQRT_2PI;
        if jacobian && p.strain > model::yield_strain(x[0], x[1])? {
            v -= model::hardening_jacobian(st.plastic_strain, x[0], x[2], x[3]).ln();
        }
        return Ok(v);
    }
    let c = model.stress(p.strain, x)?;
    let r = (p.stress - c) / s;
    Ok(-0.5 * r * r - s.ln() - LN_SQRT_2PI)
}

#[derive(Clone, Copy, Debug)]
struct StrainNoise {
    s_stress: f64,
    s_strain: f64,
    upper: f64,
}

impl StrainNoise {
    fn log_norm(&self) -> f64 {
        -(2.0 * PI * self.s_stress * self.s_strain).ln()
    }
}

/// `ln ∫_lo^hi exp(−(σᵐ − c0 − k ε)²/(2S_σ²) − (εᵐ − ε)²/(2S_ε²)) dε`.
///
/// Completing the square in `ε` gives a Gaussian with precision
/// `k²/S_σ² + 1/S_ε²`, centre `(k(σᵐ − c0)/S_σ² + εᵐ/S_ε²)/precision` and
/// residual exponent `(σᵐ − c0 − k εᵐ)² / (2(S_σ² + k² S_ε²))`.
pub fn log_affine_branch(
    stress_m: f64,
    strain_m: f64,
    s_stress: f64,
    s_strain: f64,
    offset: f64,
    slope: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    if !(hi > lo) {
        return f64::NEG_INFINITY;
    }
    let r = stress_m - offset;
    let (vs, ve) = (s_stress * s_stress, s_strain * s_strain);
    let var = 1.0 / (slope * slope / vs + 1.0 / ve);
    let sd = var.sqrt();
    let centre = (r * slope / vs + strain_m / ve) * var;
    let resid = r - slope * strain_m;
    let min_exponent = resid * resid / (vs + slope * slope * ve);
    -0.5 * min_exponent
        + 0.5 * (2.0 * PI * var).ln()
        + log_normal_interval((lo - centre) / sd, (hi - centre) / sd)
}

fn elastic_branch(e: f64, p: &Point, n: &StrainNoise, hi: f64) -> f64 {
    log_affine_branch(p.stress, p.strain, n.s_stress, n.s_strain, 0.0, e, 0.0, hi.min(n.upper))
}

fn log_point_double_le(e: f64, p: &Point, n: &StrainNoise) -> f64 {
    n.log_norm() + elastic_branch(e, p, n, f64::INFINITY)
}

fn log_point_double_lepp(e: f64, sy: f64, p: &Point, n: &StrainNoise) -> Result<f64> {
    if !(e > 0.0) {
        return Err(Error::Domain(format!("LE-PP likelihood needs E > 0, got {e}")));
    }
    let ey = sy / e;
    let elastic = elastic_branch(e, p, n, ey);
    let plastic = log_affine_branch(p.stress, p.strain, n.s_stress, n.s_strain, sy, 0.0, ey, n.upper);
    Ok(n.log_norm() + log_add_exp(elastic, plastic))
}

fn log_point_double_lelh(e: f64, sy: f64, h: f64, p: &Point, n: &StrainNoise) -> Result<f64> {
    let et = model::tangent_modulus(e, h)?;
    if !(e > 0.0) {
        return Err(Error::Domain(format!("LE-LH likelihood needs E > 0, got {e}")));
    }
    let ey = sy / e;
    let elastic = elastic_branch(e, p, n, ey);
    let plastic = log_affine_branch(
        p.stress,
        p.strain,
        n.s_stress,
        n.s_strain,
        sy - et * ey,
        et,
        ey,
        n.upper,
    );
    Ok(n.log_norm() + log_add_exp(elastic, plastic))
}

fn log_point_double_lenh(
    x: &[f64],
    p: &Point,
    n: &StrainNoise,
    quad: QuadratureSpec,
    jacobian: bool,
) -> Result<f64> {
    let (e, sy, h, expo) = (x[0], x[1], x[2], x[3]);
    let ey = model::yield_strain(e, sy)?;
    let elastic = elastic_branch(e, p, n, ey);

    let half = quad.width * n.s_strain;
    let mut lo = ey.max(p.strain - half);
    let mut hi = n.upper.min(p.strain + half);
    // Where the stress residual is within the window the integrand can be
    // much narrower than S_ε; the explicit inverse of the hardening law
    // bounds that band. Skipped when the band misses the strain window.
    if h > 0.0 && hi > lo {
        let strain_at = |s: f64| s / e + ((s - sy).max(0.0) / h).powf(1.0 / expo);
        let band_lo = strain_at(p.stress - quad.width * n.s_stress);
        let band_hi = strain_at(p.stress + quad.width * n.s_stress);
        if band_lo < hi && band_hi > lo {
            lo = lo.max(band_lo);
            hi = hi.min(band_hi);
        }
    }
    let plastic = if hi > lo {
        let log_integrand = |eps: f64| -> Result<f64> {
            let st = model::state_lenh(eps, e, sy, h, expo)?;
            let (rs, re) = ((p.stress - st.stress) / n.s_stress, (p.strain - eps) / n.s_strain);
            let mut v = -0.5 * (rs * rs + re * re);
            // At the yield node itself J is its limit: ∞ for n < 1.
            if jacobian {
                v -= model::hardening_jacobian(st.plastic_strain, e, h, expo).ln();
            }
            Ok(v)
        };
        plastic_integral(log_integrand, ey, lo, hi, quad, grading_power(expo, jacobian))
            .map_err(|err| match err {
                Error::Numerical(msg) => Error::Numerical(format!(
                    "{msg} (measurement strain {:e}, stress {:e}, x = {x:?})",
                    p.strain, p.stress
                )),
                other => other,
            })?
    } else {
        f64::NEG_INFINITY
    };
    Ok(n.log_norm() + log_add_exp(elastic, plastic))
}

const PILOT_NODES: usize = 64;
const GRADED_FRACTION: f64 = 0.25;

// Next to yield the plastic integrand is smooth plus a multiple of
// (ε − ε_y)^β. Simpson keeps fourth order once β ≥ 3; below that the
// substitution ε − ε_y ∝ t^k with k(β + 1) ≥ 4 restores it.
fn grading_power(n: f64, jacobian: bool) -> i32 {
    let beta = match (n < 1.0, jacobian) {
        _ if n == 1.0 => return 1,
        (true, true) => (1.0 - n) / n,
        (true, false) => 1.0 / n,
        (false, true) => n - 1.0,
        (false, false) => n,
    };
    if beta.fract() == 0.0 {
        return 1;
    }
    (4.0 / (beta + 1.0)).ceil().clamp(1.0, 4.0) as i32
}

// A pilot scan trims [lo, hi] to the nodes whose log-integrand lies within
// w²/2 + 5 of the largest, plus one pilot cell on each side. When the trimmed
// window starts at the yield strain, its first quarter is integrated in t with
// ε = ε_y + L t^k (see `grading_power`) and the rest with plain Simpson.
fn plastic_integral<G>(
    mut g: G,
    ey: f64,
    lo: f64,
    hi: f64,
    quad: QuadratureSpec,
    power: i32,
) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let step = (hi - lo) / PILOT_NODES as f64;
    let node = |i: usize| if i == PILOT_NODES { hi } else { lo + step * i as f64 };
    let mut pilot = Vec::with_capacity(PILOT_NODES + 1);
    for i in 0..=PILOT_NODES {
        pilot.push(g(node(i))?);
    }
    let peak = pilot.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok(peak);
    }
    let cut = peak - 0.5 * quad.width * quad.width - 5.0;
    let first = pilot.iter().position(|&v| v >= cut).unwrap_or(0);
    let last = pilot.iter().rposition(|&v| v >= cut).unwrap_or(PILOT_NODES);
    let (a, b) = (node(first.saturating_sub(1)), node((last + 1).min(PILOT_NODES)));

    if a > ey || power == 1 {
        return log_simpson(g, a, b, quad.panels);
    }
    // Panels are split so the node spacing is continuous at the junction.
    let k = power as f64;
    let graded_span = (b - a) * GRADED_FRACTION;
    let r = k * GRADED_FRACTION / (1.0 + (k - 1.0) * GRADED_FRACTION);
    let graded_panels = ((quad.panels as f64 * r) as usize).max(2) & !1;
    let split = a + graded_span;
    let graded = log_simpson(
        |t: f64| {
            if t == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let jac = (k * graded_span).ln() + (k - 1.0) * t.ln();
            Ok(g(a + graded_span * t.powi(power))? + jac)
        },
        0.0,
        1.0,
        graded_panels,
    )?;
    let rest = log_simpson(g, split, b, (quad.panels - graded_panels).max(2))?;
    Ok(log_add_exp(graded, rest))
}

fn check_regime(set: &MeasurementSet, regime_double: bool) -> Result<()> {
    if set.noise().strain_std().is_some() != regime_double {
        return Err(Error::Config(format!(
            "measurement set has {:?} noise",
            set.noise().regime()
        )));
    }
    Ok(())
}

/// Stress-only log-likelihood for any model, using the set's noise level.
pub fn loglik_single(model: ModelKind, x: &[f64], set: &MeasurementSet) -> Result<f64> {
    check_regime(set, false)?;
    LikelihoodSpec::new(model, *set.noise())?.log_likelihood(x, set)
}

/// Strain-noise log-likelihood of the linear elastic model.
pub fn loglik_double_le(e: f64, set: &MeasurementSet) -> Result<f64> {
    check_regime(set, true)?;
    LikelihoodSpec::new(ModelKind::Le, *set.noise())?.log_likelihood(&[e], set)
}

pub fn loglik_double_lepp(x: &[f64], set: &MeasurementSet) -> Result<f64> {
    check_regime(set, true)?;
    LikelihoodSpec::new(ModelKind::LePp, *set.noise())?.log_likelihood(x, set)
}

pub fn loglik_double_lelh(x: &[f64], set: &MeasurementSet) -> Result<f64> {
    check_regime(set, true)?;
    LikelihoodSpec::new(ModelKind::LeLh, *set.noise())?.log_likelihood(x, set)
}

pub fn loglik_double_lenh(x: &[f64], set: &MeasurementSet, quad: QuadratureSpec) -> Result<f64> {
    check_regime(set, true)?;
    LikelihoodSpec::new(ModelKind::LeNh, *set.noise())?
        .with_quadrature(quad)?
        .log_likelihood(x, set)
}
