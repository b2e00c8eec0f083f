//! Log-space Gaussian interval probabilities.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::{erf, erfc};

/// ln Q(x) where Q is the standard normal upper tail, accurate for large x.
pub fn log_upper_tail(x: f64) -> f64 {
    if x < 35.0 {
        (0.5 * erfc(x * FRAC_1_SQRT_2)).ln()
    } else {
        // Asymptotic Mills-ratio series; relative error below 1e-12 here.
        let r = 1.0 / (x * x);
        let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
        -0.5 * x * x - x.ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

/// ln(Φ(b) − Φ(a)) for `a <= b`, without cancellation in either tail.
pub fn log_normal_interval(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        let (la, lb) = (log_upper_tail(a), log_upper_tail(b));
        la + (-(lb - la).exp()).ln_1p()
    } else if b <= 0.0 {
        let (la, lb) = (log_upper_tail(-b), log_upper_tail(-a));
        la + (-(lb - la).exp()).ln_1p()
    } else {
        (0.5 * (erf(b * FRAC_1_SQRT_2) - erf(a * FRAC_1_SQRT_2))).ln()
    }
}

/// `ln(e^a + e^b)` with `−∞` handled.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}
