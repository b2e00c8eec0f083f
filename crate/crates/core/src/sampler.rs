//! Random-walk Metropolis-Hastings with a fixed isotropic proposal and with
//! the adaptive proposal rebuilt from the chain history.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::LogDensity;
use crate::rng::{self, Stream};

/// How the adaptive proposal turns the history into a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalForm {
    /// `x + γ/√(i−1) · K̃ᵀ z` with `z` a standard normal vector with one
    /// entry per history row. Costs O(i) per proposal, so a whole run is
    /// quadratic in its length.
    History,
    /// `x + γ · L z` with `L Lᵀ = K̃ᵀK̃/(i−1)` and `z` of the parameter
    /// dimension. Same proposal distribution, O(n²) per proposal.
    #[default]
    Factor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_samples: usize,
    /// Samples discarded by [`crate::diagnostics::summarize`]; adaptation
    /// still uses them.
    pub burn_in: usize,
    /// Starting point; defaults to the target's preferred start (the prior
    /// mean for posteriors).
    pub initial: Option<Vec<f64>>,
    /// Proposal width; defaults to `2.38/√n`.
    pub gamma: Option<f64>,
    /// Samples between proposal rebuilds.
    pub cadence: usize,
    pub seed: u64,
    /// When set, only the most recent rows of the history feed the
    /// adaptive proposal.
    pub history_cap: Option<usize>,
    pub proposal: ProposalForm,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_samples: 10_000,
            burn_in: 3_000,
            initial: None,
            gamma: None,
            cadence: 1_000,
            seed: 0,
            history_cap: None,
            proposal: ProposalForm::Factor,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if self.burn_in >= self.n_samples {
            return Err(Error::Config(format!(
                "burn-in {} must be smaller than the chain length {}",
                self.burn_in, self.n_samples
            )));
        }
        if self.gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if self.cadence == 0 {
            return Err(Error::Config("adaptation cadence must be >= 1".into()));
        }
        if self.history_cap.is_some_and(|c| c < 2) {
            return Err(Error::Config("history cap must keep at least 2 samples".into()));
        }
        Ok(())
    }

    pub fn gamma_for(&self, dim: usize) -> f64 {
        self.gamma.unwrap_or(2.38 / (dim as f64).sqrt())
    }
}

/// Samples produced by one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    dim: usize,
    samples: Vec<f64>,
    log_densities: Vec<f64>,
    accepted: usize,
    seed: u64,
    proposal_covariance: Option<Vec<f64>>,
}

impl Chain {
    /// Builds a chain from stored rows (for example one read back from disk).
    pub fn from_parts(dim: usize, samples: Vec<f64>, log_densities: Vec<f64>, accepted: usize, seed: u64) -> Result<Self> {
        if dim == 0 || samples.len() != dim * log_densities.len() {
            return Err(Error::Config("chain rows and log-densities disagree".into()));
        }
        Ok(Chain {
            dim,
            samples,
            log_densities,
            accepted,
            seed,
            proposal_covariance: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_densities.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.samples.chunks_exact(self.dim)
    }

    pub fn log_densities(&self) -> &[f64] {
        &self.log_densities
    }

    /// Column `j` as a vector.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.samples().map(|s| s[j]).collect()
    }

    pub fn accepted(&self) -> usize {
        self.accepted
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.len().max(1) as f64
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major `γ² R` from the last successful adaptation, if any.
    pub fn proposal_covariance(&self) -> Option<&[f64]> {
        self.proposal_covariance.as_deref()
    }

    /// Concatenates post-burn-in samples of several independent chains.
    pub fn merge(chains: &[Chain], burn_in: usize) -> Result<Chain> {
        let first = chains.first().ok_or_else(|| Error::Config("no chains to merge".into()))?;
        let mut out = Chain {
            dim: first.dim,
            samples: Vec::new(),
            log_densities: Vec::new(),
            accepted: 0,
            seed: first.seed,
            proposal_covariance: None,
        };
        for c in chains {
            if c.dim != first.dim || burn_in >= c.len() {
                return Err(Error::Config("chains cannot be merged".into()));
            }
            out.samples.extend_from_slice(&c.samples[burn_in * c.dim..]);
            out.log_densities.extend_from_slice(&c.log_densities[burn_in..]);
            out.accepted += c.accepted;
        }
        Ok(out)
    }
}

struct Walker<'a, T: ?Sized> {
    target: &'a T,
    x0: Vec<f64>,
    x: Vec<f64>,
    lp: f64,
    proposal_rng: ChaCha20Rng,
    accept_rng: ChaCha20Rng,
    chain: Chain,
    scratch: Vec<f64>,
}

impl<'a, T: LogDensity + ?Sized> Walker<'a, T> {
    fn start(target: &'a T, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = target.dim();
        let x0 = match &cfg.initial {
            Some(x) => x.clone(),
            None => target.default_start().ok_or_else(|| {
                Error::Config("no initial sample given and the target has no default".into())
            })?,
        };
        if x0.len() != dim {
            return Err(Error::Config(format!(
                "initial sample has {} components, target has {dim}",
                x0.len()
            )));
        }
        let lp = target.log_density(&x0)?;
        if !lp.is_finite() {
            return Err(Error::Config(format!(
                "initial sample {x0:?} lies outside the posterior support"
            )));
        }
        Ok(Walker {
            target,
            x: x0.clone(),
            x0,
            lp,
            proposal_rng: rng::stream(cfg.seed, Stream::Proposal),
            accept_rng: rng::stream(cfg.seed, Stream::Acceptance),
            chain: Chain {
                dim,
                samples: Vec::with_capacity(cfg.n_samples * dim),
                log_densities: Vec::with_capacity(cfg.n_samples),
                accepted: 0,
                seed: cfg.seed,
                proposal_covariance: None,
            },
            scratch: vec![0.0; dim],
        })
    }

    /// Metropolis accept/reject of the point in `scratch`.
    fn step(&mut self) -> Result<()> {
        let lp_new = self.target.log_density(&self.scratch)?;
        if lp_new.is_nan() {
            return Err(Error::Numerical(format!(
                "log-density is NaN at {:?}",
                self.scratch
            )));
        }
        // u in (0, 1] so ln u is finite.
        let u: f64 = 1.0 - self.accept_rng.random::<f64>();
        if lp_new - self.lp >= u.ln() {
            std::mem::swap(&mut self.x, &mut self.scratch);
            self.lp = lp_new;
            self.chain.accepted += 1;
        }
        self.chain.samples.extend_from_slice(&self.x);
        self.chain.log_densities.push(self.lp);
        Ok(())
    }

    fn propose_isotropic(&mut self, gamma: f64) {
        for (s, &xi) in self.scratch.iter_mut().zip(&self.x) {
            let z: f64 = self.proposal_rng.sample(StandardNormal);
            *s = xi + gamma * z;
        }
    }
}

/// Standard Metropolis-Hastings with the isotropic Gaussian proposal
/// `x_p = x_i + γ z`.
pub fn run_mh<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<Chain> {
    let mut w = Walker::start(target, cfg)?;
    let gamma = cfg.gamma_for(w.chain.dim);
    for _ in 0..cfg.n_samples {
        w.propose_isotropic(gamma);
        w.step()?;
    }
    Ok(w.chain)
}

/// Adapted proposal built from a snapshot of the history.
struct Adapted {
    /// Column-centred history, row-major `m × n`.
    centred: Vec<f64>,
    rows: usize,
    chol: Cholesky<f64, Dyn>,
}

impl Adapted {
    fn build(history: &[f64], dim: usize) -> Option<Self> {
        let rows = history.len() / dim;
        if rows < 2 {
            return None;
        }
        let mut mean = vec![0.0; dim];
        for row in history.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let centred: Vec<f64> = history
            .chunks_exact(dim)
            .flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m))
            .collect();
        let k = DMatrix::from_row_slice(rows, dim, &centred);
        let r = k.tr_mul(&k) / (rows as f64 - 1.0);
        let chol = Cholesky::new(r.clone())?;
        // Reject numerically singular histories (for example all rows
        // collinear) whose proposals would be trapped in a subspace.
        let l = chol.l_dirty();
        if (0..dim).any(|j| !(l[(j, j)] * l[(j, j)] > 1e-12 * r[(j, j)])) {
            return None;
        }
        Some(Adapted {
            centred,
            rows,
            chol,
        })
    }

    fn covariance(&self, gamma: f64) -> Vec<f64> {
        let l = self.chol.l();
        let r = &l * l.transpose() * (gamma * gamma);
        r.transpose().as_slice().to_vec()
    }
}

/// Metropolis-Hastings with the adaptive proposal.
///
/// The first `cadence` proposals are isotropic. Afterwards, every `cadence`
/// samples the proposal covariance `γ² K̃ᵀK̃/(i−1)` is rebuilt from the
/// column-centred history `K̃` of all `i` samples so far, including the
/// starting point and any burn-in. A history whose covariance is singular
/// falls back to the isotropic proposal until the next rebuild.
pub fn run_adaptive_mh<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<Chain> {
    let mut w = Walker::start(target, cfg)?;
    let dim = w.chain.dim;
    let gamma = cfg.gamma_for(dim);
    let mut adapted: Option<Adapted> = None;
    let mut z = Vec::new();

    for i in 0..cfg.n_samples {
        if i > 0 && i % cfg.cadence == 0 {
            let mut history = Vec::with_capacity((i + 1) * dim);
            history.extend_from_slice(&w.x0);
            history.extend_from_slice(&w.chain.samples);
            let keep = cfg.history_cap.map_or(history.len(), |c| (c * dim).min(history.len()));
            let start = history.len() - keep;
            adapted = Adapted::build(&history[start..], dim);
            if let Some(a) = &adapted {
                w.chain.proposal_covariance = Some(a.covariance(gamma));
            }
        }

        match &adapted {
            None => w.propose_isotropic(gamma),
            Some(a) => match cfg.proposal {
                ProposalForm::History => {
                    z.clear();
                    z.extend((0..a.rows).map(|_| w.proposal_rng.sample::<f64, _>(StandardNormal)));
                    let scale = gamma / (a.rows as f64 - 1.0).sqrt();
                    w.scratch.copy_from_slice(&w.x);
                    for (row, zr) in a.centred.chunks_exact(dim).zip(&z) {
                        for (s, k) in w.scratch.iter_mut().zip(row) {
                            *s += scale * zr * k;
                        }
                    }
                }
                ProposalForm::Factor => {
                    let l = a.chol.l_dirty();
                    z.clear();
                    z.extend((0..dim).map(|_| w.proposal_rng.sample::<f64, _>(StandardNormal)));
                    for r in 0..dim {
                        let step: f64 = (0..=r).map(|c| l[(r, c)] * z[c]).sum();
                        w.scratch[r] = w.x[r] + gamma * step;
                    }
                }
            },
        }
        w.step()?;
    }
    Ok(w.chain)
}

/// Runs `count` independent chains on scoped threads, chain `j` seeded with
/// `child_seed(cfg.seed, j)`. Results come back in chain order.
pub fn run_chains<T: LogDensity + Sync + ?Sized>(
    target: &T,
    cfg: &SamplerConfig,
    count: usize,
    adaptive: bool,
) -> Result<Vec<Chain>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count as u64)
            .map(|j| {
                let cfg = SamplerConfig {
                    seed: rng::child_seed(cfg.seed, j),
                    ..cfg.clone()
                };
                scope.spawn(move || {
                    if adaptive {
                        run_adaptive_mh(target, &cfg)
                    } else {
                        run_mh(target, &cfg)
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    })
}

/// Writes the chain as CSV: a first line `# <json header>`, a column header
/// of parameter names plus `log_density`, then one row per sample.
pub fn write_chain(chain: &Chain, path: &Path, names: &[&str], header: &serde_json::Value) -> Result<()> {
    if names.len() != chain.dim() {
        return Err(Error::Config("one column name per parameter required".into()));
    }
    let mut header = header.clone();
    if let serde_json::Value::Object(map) = &mut header {
        map.insert("seed".into(), chain.seed.into());
        map.insert("accepted".into(), chain.accepted.into());
        map.insert("samples".into(), chain.len().into());
    }
    let mut out = String::with_capacity(chain.len() * (chain.dim() + 1) * 25);
    out.push_str("# ");
    out.push_str(&serde_json::to_string(&header)?);
    out.push('\n');
    out.push_str(&names.join(","));
    out.push_str(",log_density\n");
    for (s, ld) in chain.samples().zip(chain.log_densities()) {
        for v in s {
            out.push_str(&format!("{v:.17e},"));
        }
        out.push_str(&format!("{ld:.17e}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a chain written by [`write_chain`], returning it with its header.
pub fn read_chain(path: &Path) -> Result<(Chain, serde_json::Value)> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: serde_json::Value = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| perr(1, "missing '# {json}' header".into()))
        .and_then(|l| serde_json::from_str(l).map_err(|e| perr(1, e.to_string())))?;
    let cols = lines.next().ok_or_else(|| perr(2, "missing column header".into()))?;
    let dim = cols.split(',').count().saturating_sub(1);
    if dim == 0 || !cols.ends_with("log_density") {
        return Err(perr(2, format!("unexpected column header '{cols}'")));
    }
    let (mut samples, mut lds) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let values: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(i + 3, e.to_string()))?;
        if values.len() != dim + 1 {
            return Err(perr(i + 3, format!("expected {} fields", dim + 1)));
        }
        samples.extend_from_slice(&values[..dim]);
        lds.push(values[dim]);
    }
    let accepted = header.get("accepted").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
    let seed = header.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);
    Ok((Chain::from_parts(dim, samples, lds, accepted, seed)?, header))
}
