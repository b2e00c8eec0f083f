//! Composite Simpson rule, evaluated in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Settings for the numerically integrated plastic part of the
/// nonlinear-hardening likelihood under strain noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Total number of Simpson panels; even and at least 2.
    pub panels: usize,
    /// Half-width of the strain window around each measured strain, in
    /// units of the strain noise standard deviation.
    pub width: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            panels: 1024,
            width: 8.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.panels < 2 || !self.panels.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "Simpson panels must be even and >= 2, got {}",
                self.panels
            )));
        }
        if !(self.width >= 4.0) || !self.width.is_finite() {
            return Err(Error::Config(format!(
                "quadrature width must be >= 4 standard deviations, got {}",
                self.width
            )));
        }
        Ok(())
    }
}

/// Composite Simpson approximation of `∫_a^b f`.
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 2 && panels.is_multiple_of(2), "panels must be even");
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

/// `ln ∫_a^b exp(g)` by composite Simpson, where `g` returns the log of the
/// integrand. Nodes are rescaled by their maximum so the integrand may lie
/// far outside the range of `f64` exponentials.
///
/// `g` may return `−∞`; a NaN or `+∞` aborts with the offending abscissa.
pub fn log_simpson<G>(mut g: G, a: f64, b: f64, panels: usize) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    assert!(panels >= 2 && panels.is_multiple_of(2), "panels must be even");
    if !(b > a) {
        return Ok(f64::NEG_INFINITY);
    }
    let h = (b - a) / panels as f64;
    let mut logs = Vec::with_capacity(panels + 1);
    for i in 0..=panels {
        let x = if i == panels { b } else { a + h * i as f64 };
        let v = g(x)?;
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Numerical(format!(
                "quadrature integrand is {v} at strain {x:e}"
            )));
        }
        logs.push(v);
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut sum = 0.0;
    for (i, &v) in logs.iter().enumerate() {
        let w = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * (v - peak).exp();
    }
    Ok(peak + (sum * h / 3.0).ln())
}
