//! Monotonic-tension stress response of the four one-dimensional
//! elastoplastic models.
//!
//! Every model shares the elastic branch `σ = E·ε` up to the yield strain
//! `σ_y0 / E`. The boundary point belongs to the elastic branch; all models
//! are continuous there, so the convention only fixes which code path runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which constitutive law relates stress to strain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Linear elastic; parameters `[E]`.
    #[serde(rename = "LE")]
    Le,
    /// Linear elastic, perfectly plastic; parameters `[E, σ_y0]`.
    #[serde(rename = "LE-PP")]
    LePp,
    /// Linear elastic, linear hardening; parameters `[E, σ_y0, H]`.
    #[serde(rename = "LE-LH")]
    LeLh,
    /// Linear elastic, nonlinear (power-law) hardening; parameters
    /// `[E, σ_y0, H, n]`.
    #[serde(rename = "LE-NH")]
    LeNh,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Le,
        ModelKind::LePp,
        ModelKind::LeLh,
        ModelKind::LeNh,
    ];

    pub fn n_params(self) -> usize {
        match self {
            ModelKind::Le => 1,
            ModelKind::LePp => 2,
            ModelKind::LeLh => 3,
            ModelKind::LeNh => 4,
        }
    }

    /// Column names used in chain and summary files.
    pub fn param_names(self) -> &'static [&'static str] {
        const NAMES: [&str; 4] = ["E", "sigma_y0", "H", "n"];
        &NAMES[..self.n_params()]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Le => "LE",
            ModelKind::LePp => "LE-PP",
            ModelKind::LeLh => "LE-LH",
            ModelKind::LeNh => "LE-NH",
        }
    }

    /// Theoretical stress at `strain` for a raw parameter slice.
    ///
    /// The slice length must equal [`ModelKind::n_params`].
    pub fn stress(self, strain: f64, x: &[f64]) -> Result<f64> {
        check_len(self, x)?;
        match self {
            ModelKind::Le => Ok(stress_le(strain, x[0])),
            ModelKind::LePp => stress_lepp(strain, x[0], x[1]),
            ModelKind::LeLh => stress_lelh(strain, x[0], x[1], x[2]),
            ModelKind::LeNh => stress_lenh(strain, x[0], x[1], x[2], x[3]),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LE" => Ok(ModelKind::Le),
            "LE-PP" | "LEPP" => Ok(ModelKind::LePp),
            "LE-LH" | "LELH" => Ok(ModelKind::LeLh),
            "LE-NH" | "LENH" => Ok(ModelKind::LeNh),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

fn check_len(kind: ModelKind, x: &[f64]) -> Result<()> {
    if x.len() != kind.n_params() {
        return Err(Error::Config(format!(
            "{kind} takes {} parameters, got {}",
            kind.n_params(),
            x.len()
        )));
    }
    Ok(())
}

/// A parameter vector tagged with the model it belongs to.
///
/// Components are stored in the order `E, σ_y0, H, n` (GPa, GPa, GPa,
/// dimensionless); only the first `kind.n_params()` are meaningful.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    kind: ModelKind,
    values: [f64; 4],
}

impl Params {
    pub fn new(kind: ModelKind, values: &[f64]) -> Result<Self> {
        check_len(kind, values)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite parameter {v}")));
        }
        let mut buf = [0.0; 4];
        buf[..values.len()].copy_from_slice(values);
        Ok(Params { kind, values: buf })
    }

    pub fn le(e: f64) -> Self {
        Params {
            kind: ModelKind::Le,
            values: [e, 0.0, 0.0, 0.0],
        }
    }

    pub fn lepp(e: f64, sigma_y0: f64) -> Self {
        Params {
            kind: ModelKind::LePp,
            values: [e, sigma_y0, 0.0, 0.0],
        }
    }

    pub fn lelh(e: f64, sigma_y0: f64, h: f64) -> Self {
        Params {
            kind: ModelKind::LeLh,
            values: [e, sigma_y0, h, 0.0],
        }
    }

    pub fn lenh(e: f64, sigma_y0: f64, h: f64, n: f64) -> Self {
        Params {
            kind: ModelKind::LeNh,
            values: [e, sigma_y0, h, n],
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.kind.n_params()]
    }

    pub fn young(&self) -> f64 {
        self.values[0]
    }

    pub fn yield_stress(&self) -> Option<f64> {
        (self.kind.n_params() > 1).then_some(self.values[1])
    }

    pub fn hardening(&self) -> Option<f64> {
        (self.kind.n_params() > 2).then_some(self.values[2])
    }

    pub fn exponent(&self) -> Option<f64> {
        (self.kind.n_params() > 3).then_some(self.values[3])
    }

    /// True when every component is nonnegative.
    pub fn is_admissible(&self) -> bool {
        self.as_slice().iter().all(|&v| v >= 0.0)
    }

    pub fn stress(&self, strain: f64) -> Result<f64> {
        self.kind.stress(strain, self.as_slice())
    }

    pub fn yield_strain(&self) -> Result<f64> {
        match self.yield_stress() {
            Some(sy) => yield_strain(self.young(), sy),
            None => Ok(f64::INFINITY),
        }
    }
}

/// Strain at which plastic flow begins, `σ_y0 / E`.
pub fn yield_strain(e: f64, sigma_y0: f64) -> Result<f64> {
    if !(e > 0.0) {
        return Err(Error::Domain(format!(
            "yield strain undefined for E = {e}"
        )));
    }
    Ok(sigma_y0 / e)
}

pub fn stress_le(strain: f64, e: f64) -> f64 {
    e * strain
}

pub fn stress_lepp(strain: f64, e: f64, sigma_y0: f64) -> Result<f64> {
    if e == 0.0 && sigma_y0 == 0.0 {
        return Ok(0.0);
    }
    let ey = yield_strain(e, sigma_y0)?;
    Ok(if strain <= ey { e * strain } else { sigma_y0 })
}

/// Tangent modulus of the linear-hardening branch, `HE / (H + E)`.
pub fn tangent_modulus(e: f64, h: f64) -> Result<f64> {
    if h + e == 0.0 {
        return Err(Error::Domain("H + E = 0".into()));
    }
    Ok(h * e / (h + e))
}

pub fn stress_lelh(strain: f64, e: f64, sigma_y0: f64, h: f64) -> Result<f64> {
    let et = tangent_modulus(e, h)?;
    let ey = yield_strain(e, sigma_y0)?;
    Ok(if strain <= ey {
        e * strain
    } else {
        sigma_y0 + et * (strain - ey)
    })
}

/// Stress of the nonlinear-hardening model.
///
/// Above yield the stress is the root of
/// `g(σ) = σ − σ_y0 − H·(ε − σ/E)^n` on `[σ_y0, E·ε]`, where `g` is
/// strictly increasing.
pub fn stress_lenh(strain: f64, e: f64, sigma_y0: f64, h: f64, n: f64) -> Result<f64> {
    Ok(state_lenh(strain, e, sigma_y0, h, n)?.stress)
}

/// Stress and plastic strain at one point of the nonlinear-hardening curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardeningState {
    pub stress: f64,
    /// `ε − σ/E`; zero on the elastic branch.
    pub plastic_strain: f64,
}

/// Like [`stress_lenh`], also returning the plastic strain.
///
/// The plastic strain is solved for directly rather than recovered as
/// `ε − σ/E`: for small `n` it can lie far below the rounding error of that
/// difference while still setting the tangent stiffness.
pub fn state_lenh(strain: f64, e: f64, sigma_y0: f64, h: f64, n: f64) -> Result<HardeningState> {
    let ey = yield_strain(e, sigma_y0)?;
    if strain <= ey {
        return Ok(HardeningState {
            stress: e * strain,
            plastic_strain: 0.0,
        });
    }
    if h < 0.0 || !(n > 0.0) {
        return Err(Error::Domain(format!(
            "nonlinear hardening needs H >= 0 and n > 0 (H = {h}, n = {n})"
        )));
    }
    if h == 0.0 {
        return Ok(HardeningState {
            stress: sigma_y0,
            plastic_strain: strain - ey,
        });
    }
    let p = solve_plastic_strain(strain - ey, e, h, n).map_err(|err| match err {
        Error::Numerical(m) => Error::Numerical(format!(
            "{m} at strain {strain:e} (E={e}, sigma_y0={sigma_y0}, H={h}, n={n})"
        )),
        other => other,
    })?;
    Ok(HardeningState {
        stress: sigma_y0 + h * p.powf(n),
        plastic_strain: p,
    })
}

/// Residual of the implicit hardening equation.
pub fn hardening_residual(stress: f64, strain: f64, e: f64, sigma_y0: f64, h: f64, n: f64) -> f64 {
    let plastic = (strain - stress / e).max(0.0);
    stress - sigma_y0 - h * plastic.powf(n)
}

/// `dg/dσ = 1 + (H n / E) p^(n−1)` at plastic strain `p`; the
/// change-of-variables factor that appears when the deterministic stress is
/// integrated out. Infinite at `p = 0` when `n < 1`.
pub fn hardening_jacobian(plastic_strain: f64, e: f64, h: f64, n: f64) -> f64 {
    if h == 0.0 {
        return 1.0;
    }
    1.0 + h * n / e * plastic_strain.powf(n - 1.0)
}

const MAX_ROOT_ITERS: usize = 200;

/// Solves `E p + H p^n = E d` for the plastic strain `p ∈ (0, d]`, given
/// the strain `d = ε − ε_y` beyond yield.
///
/// In `u = ln p` the left side is a sum of exponentials, hence convex and
/// increasing, so Newton steps from the right never overshoot; a bisection
/// fallback on the bracket guards against rounding.
fn solve_plastic_strain(d: f64, e: f64, h: f64, n: f64) -> Result<f64> {
    let target = e * d;
    let phi = |u: f64| {
        let (a, b) = (e * u.exp(), h * (n * u).exp());
        (a + b - target, a + n * b)
    };
    // Below both d/2 and (E d / 2H)^(1/n) each term is under half the target.
    let p_lo = (0.5 * d).min((0.5 * target / h).powf(1.0 / n));
    let (mut lo, mut hi) = (p_lo.ln(), d.ln());
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Numerical(format!(
            "plastic strain bracket [{p_lo:e}, {d:e}] is not representable"
        )));
    }
    let tol = 4.0 * f64::EPSILON * target;
    let mut u = hi;
    for _ in 0..MAX_ROOT_ITERS {
        let (f, df) = phi(u);
        if f.abs() <= tol {
            return Ok(u.exp());
        }
        if f < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let newton = u - f / df;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == u || hi - lo <= 2.0 * f64::EPSILON * hi.abs().max(1.0) {
            return Ok(next.exp());
        }
        u = next;
    }
    Err(Error::Numerical(format!(
        "plastic strain did not converge; last bracket [{:e}, {:e}]",
        lo.exp(),
        hi.exp()
    )))
}
