//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use tensile_bayes::data::{MeasurementSet, NoiseSpec, Point};
use tensile_bayes::likelihood;
use tensile_bayes::model::{self, ModelKind};
use tensile_bayes::QuadratureSpec;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let (f1, f2) = (f(c - h * XGK[j]), f(c + h * XGK[j]));
        k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod 7/15 quadrature: repeatedly bisects the
/// interval with the largest error estimate until the summed estimate is
/// below `rel_tol` of the integral.
pub fn integrate(f: &dyn Fn(f64) -> f64, breakpoints: &[f64], rel_tol: f64) -> f64 {
    let mut pieces: Vec<(f64, f64, f64, f64)> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk15(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    for _ in 0..200_000 {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() || err == 0.0 {
            return total;
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .unwrap();
        let (a, b, _, _) = pieces.swap_remove(idx);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return total;
        }
        for (lo, hi) in [(a, m), (m, b)] {
            let (v, e) = gk15(f, lo, hi);
            pieces.push((lo, hi, v, e));
        }
    }
    panic!("quadrature oracle did not converge");
}

/// `ln ∫ exp(ell)` over `[lo, hi]`, rescaling by the maximum of `ell` found
/// on a fine scan, with the scan's argmax and `extra` as breakpoints.
pub fn log_integrate(ell: &dyn Fn(f64) -> f64, lo: f64, hi: f64, extra: &[f64]) -> f64 {
    let scan = 4000;
    let mut peak = f64::NEG_INFINITY;
    let mut arg = lo;
    for i in 0..=scan {
        let x = lo + (hi - lo) * i as f64 / scan as f64;
        let v = ell(x);
        if v > peak {
            peak = v;
            arg = x;
        }
    }
    for &x in extra {
        if x > lo && x < hi && ell(x) > peak {
            peak = ell(x);
            arg = x;
        }
    }
    let mut cuts = vec![lo, hi, arg];
    cuts.extend(extra.iter().copied().filter(|&x| x > lo && x < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let f = |x: f64| (ell(x) - peak).exp();
    peak + integrate(&f, &cuts, 1e-13).ln()
}

/// Defining integral of the stress-and-strain likelihood for one point:
/// `1/(2π S_σ S_ε) ∫_0^a exp(−(σᵐ − σ(ε))²/2S_σ² − (εᵐ − ε)²/2S_ε²) / J(ε) dε`,
/// where `J` is the hardening Jacobian for LE-NH (when enabled) and 1
/// otherwise. The stress is evaluated with the library's constitutive laws.
pub fn double_noise_oracle(
    kind: ModelKind,
    x: &[f64],
    strain_m: f64,
    stress_m: f64,
    s_stress: f64,
    s_strain: f64,
    upper: f64,
    jacobian: bool,
) -> f64 {
    let ell = |eps: f64| {
        let (stress, jac) = if kind == ModelKind::LeNh {
            let st = model::state_lenh(eps, x[0], x[1], x[2], x[3]).unwrap();
            let j = if jacobian && st.plastic_strain > 0.0 {
                model::hardening_jacobian(st.plastic_strain, x[0], x[2], x[3])
            } else {
                1.0
            };
            (st.stress, j)
        } else {
            (kind.stress(eps, x).unwrap(), 1.0)
        };
        let rs = (stress_m - stress) / s_stress;
        let re = (strain_m - eps) / s_strain;
        -0.5 * (rs * rs + re * re) - jac.ln()
    };
    let lo = (strain_m - 40.0 * s_strain).max(0.0);
    let hi = (strain_m + 40.0 * s_strain).min(upper);
    if hi <= lo {
        return f64::NEG_INFINITY;
    }
    let mut extra = vec![strain_m];
    if kind != ModelKind::Le && x[0] > 0.0 {
        extra.push(x[1] / x[0]);
    }
    // The stress residual can confine the integrand to a sliver much
    // narrower than S_ε; break where σ(ε) crosses σᵐ + k·S_σ (the response
    // is nondecreasing, so bisection finds each crossing).
    let stress = |eps: f64| kind.stress(eps, x).unwrap();
    for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
        let level = stress_m + k * s_stress;
        let (mut a, mut b) = (lo, hi.min(1.0));
        if !(stress(a) < level && stress(b) > level) {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if stress(m) < level {
                a = m;
            } else {
                b = m;
            }
        }
        extra.push(0.5 * (a + b));
    }
    -(2.0 * PI * s_stress * s_strain).ln() + log_integrate(&ell, lo, hi, &extra)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

/// Thins a series to roughly independent draws.
pub fn thin(xs: &[f64], every: usize) -> Vec<f64> {
    xs.iter().step_by(every).copied().collect()
}

/// `g(σ) = σ − σ_y0 − H (ε − σ/E)^n` with the plastic strain formed from a
/// compensated quotient, so the residual reflects the stress rather than
/// the rounding of `ε − σ/E`.
pub fn hardening_residual(stress: f64, strain: f64, e: f64, sy: f64, h: f64, n: f64) -> f64 {
    let q = stress / e;
    let rem = (-q).mul_add(e, stress);
    let plastic = ((strain - q) - rem / e).max(0.0);
    stress - sy - h * plastic.powf(n)
}

/// Plain bisection for the nonlinear-hardening stress on `[σ_y0, E ε]`.
pub fn bisect_hardening(strain: f64, e: f64, sy: f64, h: f64, n: f64, iterations: usize) -> f64 {
    if strain <= sy / e {
        return e * strain;
    }
    let (mut lo, mut hi) = (sy, e * strain);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hardening_residual(mid, strain, e, sy, h, n) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub struct Instance {
    pub x: Vec<f64>,
    pub point: Point,
    pub s_stress: f64,
    pub s_strain: f64,
    pub upper: Option<f64>,
}

impl Instance {
    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec::StressAndStrain {
            s_stress: self.s_stress,
            s_strain: self.s_strain,
            strain_upper_bound: self.upper,
        }
    }

    pub fn set(&self) -> MeasurementSet {
        MeasurementSet::new(vec![self.point], self.noise(), "").unwrap()
    }
}

/// Random parameters and one noisy measurement near the yield region; a
/// fifth of the instances carry a finite strain upper bound.
pub fn random_instance(kind: ModelKind, rng: &mut ChaCha20Rng) -> Instance {
    let e = rng.random_range(50.0..300.0);
    let sy = rng.random_range(0.05..0.5);
    let x = match kind {
        ModelKind::Le => vec![e],
        ModelKind::LePp => vec![e, sy],
        ModelKind::LeLh => vec![e, sy, rng.random_range(0.0..50.0)],
        ModelKind::LeNh => vec![e, sy, rng.random_range(0.1..10.0), rng.random_range(0.2..2.0)],
    };
    let s_stress = rng.random_range(1e-3..3e-2);
    let s_strain = rng.random_range(1e-5..5e-4);
    let ey = sy / e;
    let eps = rng.random_range(0.0..3.0 * ey);
    let z1: f64 = rng.sample(rand_distr::StandardNormal);
    let z2: f64 = rng.sample(rand_distr::StandardNormal);
    let strain = eps + s_strain * z1;
    let stress = kind.stress(eps, &x).unwrap() + s_stress * z2;
    let upper = rng.random_bool(0.2).then(|| eps + rng.random_range(0.0..4.0) * s_strain + 1e-6);
    Instance {
        x,
        point: Point { strain, stress },
        s_stress,
        s_strain,
        upper,
    }
}

pub fn closed_form(kind: ModelKind, inst: &Instance) -> f64 {
    let set = inst.set();
    match kind {
        ModelKind::Le => likelihood::loglik_double_le(inst.x[0], &set).unwrap(),
        ModelKind::LePp => likelihood::loglik_double_lepp(&inst.x, &set).unwrap(),
        ModelKind::LeLh => likelihood::loglik_double_lelh(&inst.x, &set).unwrap(),
        ModelKind::LeNh => {
            likelihood::loglik_double_lenh(&inst.x, &set, QuadratureSpec::default()).unwrap()
        }
    }
}

pub fn oracle(kind: ModelKind, inst: &Instance) -> f64 {
    double_noise_oracle(
        kind,
        &inst.x,
        inst.point.strain,
        inst.point.stress,
        inst.s_stress,
        inst.s_strain,
        inst.upper.unwrap_or(f64::INFINITY),
        true,
    )
}
