#ifndef TENSILE_BAYES_H
#define TENSILE_BAYES_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define TB_OK 0

#define TB_ERR_NULL 1

#define TB_ERR_CONFIG 2

#define TB_ERR_DOMAIN 3

#define TB_ERR_NUMERICAL 4

#define TB_ERR_PARSE 5

#define TB_ERR_IO 6

#define TB_ERR_PANIC 7

#define TB_MODEL_LE 0

#define TB_MODEL_LE_PP 1

#define TB_MODEL_LE_LH 2

#define TB_MODEL_LE_NH 3

/**
 * Samples of one sampler run, burn-in included.
 */
typedef struct TbChain TbChain;

/**
 * Posterior density over the parameters of one model and data set.
 */
typedef struct TbPosterior TbPosterior;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of the calling thread into `buf` as a
 * NUL-terminated string, truncating to `len - 1` bytes. Returns the full
 * message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t tb_last_error_message(char *buf, size_t len);

/**
 * Stress response of `model` with parameters `params[0..n_params]` at
 * `strain`.
 *
 * # Safety
 * `params` must point to `n_params` readable doubles; `out` must be
 * writable.
 */
int32_t tb_stress(int32_t model_code,
                  const double *params,
                  size_t n_params,
                  double strain,
                  double *out);

/**
 * Closed-form posterior of Young's modulus for the linear elastic model
 * with prior `N(prior_mean, prior_std²)` and stress noise `s_noise`.
 *
 * # Safety
 * `strains` and `stresses` must point to `n` readable doubles; `mean` and
 * `std` must be writable.
 */
int32_t tb_analytic_le(double prior_mean,
                       double prior_std,
                       double s_noise,
                       const double *strains,
                       const double *stresses,
                       size_t n,
                       double *mean,
                       double *std);

/**
 * Builds a posterior for `model` from a truncated normal prior
 * (`prior_mean[dim]`, row-major `prior_cov[dim*dim]`) and `n` measurements.
 * A positive `s_strain` selects the stress-and-strain noise regime; zero
 * selects stress-only noise.
 *
 * # Safety
 * Array arguments must point to the stated number of readable doubles;
 * `out` must be writable. The handle must be released with
 * [`tb_posterior_free`].
 */
int32_t tb_posterior_new(int32_t model_code,
                         const double *prior_mean,
                         const double *prior_cov,
                         size_t dim,
                         double s_stress,
                         double s_strain,
                         const double *strains,
                         const double *stresses,
                         size_t n,
                         struct TbPosterior **out);

/**
 * Unnormalized log posterior at `x[0..dim]`; `-inf` outside the support.
 *
 * # Safety
 * `posterior` must be a live handle; `x` must point to `dim` readable
 * doubles; `out` must be writable.
 */
int32_t tb_posterior_log_density(const struct TbPosterior *posterior,
                                 const double *x,
                                 size_t dim,
                                 double *out);

/**
 * # Safety
 * `posterior` must be null or a handle from [`tb_posterior_new`] that has
 * not been freed.
 */
void tb_posterior_free(struct TbPosterior *posterior);

/**
 * Runs one chain of `n_samples` from the prior mean, adaptive when
 * `adaptive` is nonzero.
 *
 * # Safety
 * `posterior` must be a live handle; `out` must be writable. The chain
 * must be released with [`tb_chain_free`].
 */
int32_t tb_sample(const struct TbPosterior *posterior,
                  size_t n_samples,
                  size_t burn_in,
                  uint64_t seed,
                  int32_t adaptive,
                  struct TbChain **out);

/**
 * Number of samples and parameter dimension of a chain.
 *
 * # Safety
 * `chain` must be a live handle; `len` and `dim` must be writable.
 */
int32_t tb_chain_shape(const struct TbChain *chain, size_t *len, size_t *dim);

/**
 * Copies all samples, row-major (`len` rows of `dim` values), into `buf`.
 *
 * # Safety
 * `chain` must be a live handle; `buf` must point to `capacity` writable
 * doubles.
 */
int32_t tb_chain_samples(const struct TbChain *chain, double *buf, size_t capacity);

/**
 * Posterior mean and standard deviation per parameter after discarding
 * `burn_in` samples, plus the overall acceptance rate.
 *
 * # Safety
 * `chain` must be a live handle; `mean` and `std` must point to `dim`
 * writable doubles; `acceptance` must be writable.
 */
int32_t tb_chain_summary(const struct TbChain *chain,
                         size_t burn_in,
                         double *mean,
                         double *std,
                         double *acceptance);

/**
 * # Safety
 * `chain` must be null or a handle from [`tb_sample`] that has not been
 * freed.
 */
void tb_chain_free(struct TbChain *chain);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TENSILE_BAYES_H */
