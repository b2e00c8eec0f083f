//! C ABI over the identification library.
//!
//! Every entry point returns a status code (`TB_OK` on success) and writes
//! results through out-pointers. On failure the message is kept per thread
//! and can be copied out with [`tb_last_error_message`]. Posteriors and
//! chains cross the boundary as opaque handles owned by the caller and
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use tensile_bayes::diagnostics;
use tensile_bayes::sampler;
use tensile_bayes::{
    AnalyticLePosterior, Chain, Error, LikelihoodSpec, LogPosterior, MeasurementSet, ModelKind, NoiseSpec,
    Point, SamplerConfig, TruncatedNormalPrior,
};

pub const TB_OK: i32 = 0;
pub const TB_ERR_NULL: i32 = 1;
pub const TB_ERR_CONFIG: i32 = 2;
pub const TB_ERR_DOMAIN: i32 = 3;
pub const TB_ERR_NUMERICAL: i32 = 4;
pub const TB_ERR_PARSE: i32 = 5;
pub const TB_ERR_IO: i32 = 6;
pub const TB_ERR_PANIC: i32 = 7;

pub const TB_MODEL_LE: i32 = 0;
pub const TB_MODEL_LE_PP: i32 = 1;
pub const TB_MODEL_LE_LH: i32 = 2;
pub const TB_MODEL_LE_NH: i32 = 3;

/// Posterior density over the parameters of one model and data set.
pub struct TbPosterior(LogPosterior);

/// Samples of one sampler run, burn-in included.
pub struct TbChain(Chain);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Json(_) => TB_ERR_CONFIG,
            Error::Domain(_) => TB_ERR_DOMAIN,
            Error::Numerical(_) => TB_ERR_NUMERICAL,
            Error::Parse { .. } => TB_ERR_PARSE,
            Error::Io { .. } => TB_ERR_IO,
        };
        Failure(code, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TB_ERR_NULL, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    let outcome = catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|_| Err(Failure(TB_ERR_PANIC, "internal panic".into())));
    match outcome {
        Ok(()) => TB_OK,
        Err(Failure(code, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            code
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

fn model(code: i32) -> Result<ModelKind, Failure> {
    match code {
        TB_MODEL_LE => Ok(ModelKind::Le),
        TB_MODEL_LE_PP => Ok(ModelKind::LePp),
        TB_MODEL_LE_LH => Ok(ModelKind::LeLh),
        TB_MODEL_LE_NH => Ok(ModelKind::LeNh),
        _ => Err(Failure(TB_ERR_CONFIG, format!("unknown model code {code}"))),
    }
}

unsafe fn points(strains: *const f64, stresses: *const f64, n: usize) -> Result<Vec<Point>, Failure> {
    let strains = input(strains, n, "strains")?;
    let stresses = input(stresses, n, "stresses")?;
    Ok(strains.iter().zip(stresses).map(|(&strain, &stress)| Point { strain, stress }).collect())
}

/// Copies the last error message of the calling thread into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Stress response of `model` with parameters `params[0..n_params]` at
/// `strain`.
///
/// # Safety
/// `params` must point to `n_params` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tb_stress(model_code: i32, params: *const f64, n_params: usize, strain: f64, out: *mut f64) -> i32 {
    guard(|| {
        let kind = model(model_code)?;
        let x = input(params, n_params, "params")?;
        if x.len() != kind.n_params() {
            return Err(Failure(
                TB_ERR_CONFIG,
                format!("{kind} takes {} parameters, got {}", kind.n_params(), x.len()),
            ));
        }
        *output(out, "out")? = kind.stress(strain, x)?;
        Ok(())
    })
}

/// Closed-form posterior of Young's modulus for the linear elastic model
/// with prior `N(prior_mean, prior_std²)` and stress noise `s_noise`.
///
/// # Safety
/// `strains` and `stresses` must point to `n` readable doubles; `mean` and
/// `std` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_analytic_le(
    prior_mean: f64,
    prior_std: f64,
    s_noise: f64,
    strains: *const f64,
    stresses: *const f64,
    n: usize,
    mean: *mut f64,
    std: *mut f64,
) -> i32 {
    guard(|| {
        let set = MeasurementSet::new(points(strains, stresses, n)?, NoiseSpec::stress_only(s_noise), "ffi")?;
        let post = AnalyticLePosterior::new(prior_mean, prior_std, &[set])?;
        *output(mean, "mean")? = post.mean;
        *output(std, "std")? = post.std;
        Ok(())
    })
}

/// Builds a posterior for `model` from a truncated normal prior
/// (`prior_mean[dim]`, row-major `prior_cov[dim*dim]`) and `n` measurements.
/// A positive `s_strain` selects the stress-and-strain noise regime; zero
/// selects stress-only noise.
///
/// # Safety
/// Array arguments must point to the stated number of readable doubles;
/// `out` must be writable. The handle must be released with
/// [`tb_posterior_free`].
#[no_mangle]
pub unsafe extern "C" fn tb_posterior_new(
    model_code: i32,
    prior_mean: *const f64,
    prior_cov: *const f64,
    dim: usize,
    s_stress: f64,
    s_strain: f64,
    strains: *const f64,
    stresses: *const f64,
    n: usize,
    out: *mut *mut TbPosterior,
) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        let kind = model(model_code)?;
        let prior = TruncatedNormalPrior::new(
            input(prior_mean, dim, "prior_mean")?,
            input(prior_cov, dim * dim, "prior_cov")?,
        )?;
        let noise = if s_strain == 0.0 {
            NoiseSpec::stress_only(s_stress)
        } else {
            NoiseSpec::stress_and_strain(s_stress, s_strain)
        };
        let data = MeasurementSet::new(points(strains, stresses, n)?, noise, "ffi")?;
        let post = LogPosterior::new(prior, LikelihoodSpec::new(kind, noise)?, data)?;
        *out = Box::into_raw(Box::new(TbPosterior(post)));
        Ok(())
    })
}

/// Unnormalized log posterior at `x[0..dim]`; `-inf` outside the support.
///
/// # Safety
/// `posterior` must be a live handle; `x` must point to `dim` readable
/// doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_posterior_log_density(
    posterior: *const TbPosterior,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let post = posterior.as_ref().ok_or_else(|| null("posterior"))?;
        *output(out, "out")? = post.0.log_posterior(input(x, dim, "x")?)?;
        Ok(())
    })
}

/// # Safety
/// `posterior` must be null or a handle from [`tb_posterior_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn tb_posterior_free(posterior: *mut TbPosterior) {
    if !posterior.is_null() {
        drop(Box::from_raw(posterior));
    }
}

/// Runs one chain of `n_samples` from the prior mean, adaptive when
/// `adaptive` is nonzero.
///
/// # Safety
/// `posterior` must be a live handle; `out` must be writable. The chain
/// must be released with [`tb_chain_free`].
#[no_mangle]
pub unsafe extern "C" fn tb_sample(
    posterior: *const TbPosterior,
    n_samples: usize,
    burn_in: usize,
    seed: u64,
    adaptive: i32,
    out: *mut *mut TbChain,
) -> i32 {
    guard(|| {
        let post = posterior.as_ref().ok_or_else(|| null("posterior"))?;
        let out = output(out, "out")?;
        let cfg = SamplerConfig { n_samples, burn_in, seed, ..Default::default() };
        let run = if adaptive != 0 { sampler::run_adaptive_mh } else { sampler::run_mh };
        *out = Box::into_raw(Box::new(TbChain(run(&post.0, &cfg)?)));
        Ok(())
    })
}

/// Number of samples and parameter dimension of a chain.
///
/// # Safety
/// `chain` must be a live handle; `len` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_chain_shape(chain: *const TbChain, len: *mut usize, dim: *mut usize) -> i32 {
    guard(|| {
        let chain = &chain.as_ref().ok_or_else(|| null("chain"))?.0;
        *output(len, "len")? = chain.len();
        *output(dim, "dim")? = chain.dim();
        Ok(())
    })
}

/// Copies all samples, row-major (`len` rows of `dim` values), into `buf`.
///
/// # Safety
/// `chain` must be a live handle; `buf` must point to `capacity` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn tb_chain_samples(chain: *const TbChain, buf: *mut f64, capacity: usize) -> i32 {
    guard(|| {
        let chain = &chain.as_ref().ok_or_else(|| null("chain"))?.0;
        let need = chain.len() * chain.dim();
        if capacity < need {
            return Err(Failure(TB_ERR_CONFIG, format!("buffer holds {capacity} values, chain has {need}")));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let dst = slice::from_raw_parts_mut(buf, need);
        for (row, s) in dst.chunks_exact_mut(chain.dim()).zip(chain.samples()) {
            row.copy_from_slice(s);
        }
        Ok(())
    })
}

/// Posterior mean and standard deviation per parameter after discarding
/// `burn_in` samples, plus the overall acceptance rate.
///
/// # Safety
/// `chain` must be a live handle; `mean` and `std` must point to `dim`
/// writable doubles; `acceptance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_chain_summary(
    chain: *const TbChain,
    burn_in: usize,
    mean: *mut f64,
    std: *mut f64,
    acceptance: *mut f64,
) -> i32 {
    guard(|| {
        let chain = &chain.as_ref().ok_or_else(|| null("chain"))?.0;
        if mean.is_null() || std.is_null() {
            return Err(null("mean/std"));
        }
        let summary = diagnostics::summarize(chain, burn_in)?;
        slice::from_raw_parts_mut(mean, chain.dim()).copy_from_slice(&summary.mean);
        slice::from_raw_parts_mut(std, chain.dim()).copy_from_slice(&summary.std);
        *output(acceptance, "acceptance")? = chain.acceptance_rate();
        Ok(())
    })
}

/// # Safety
/// `chain` must be null or a handle from [`tb_sample`] that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn tb_chain_free(chain: *mut TbChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}
