//! Command-line verbs. Each reads one JSON [`RunConfig`] and writes its
//! results as CSV and JSON files into an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::RunConfig;
use crate::data::{self, MeasurementSet, NoiseRegime, NoiseSpec};
use crate::error::{Error, Result};
use crate::experiments::{self, Identification, IdentifySettings};
use crate::likelihood::LikelihoodSpec;
use crate::model::ModelKind;
use crate::posterior::{AnalyticLePosterior, LogPosterior};
use crate::sampler;

#[derive(Debug, Parser)]
#[command(name = "tensile-bayes", version, about = "Bayesian identification of elastoplastic parameters")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Write a synthetic measurement file.
    Generate(RunArgs),
    /// Sample the posterior for a measurement file.
    Identify(RunArgs),
    /// Conjugate MAP over a grid of prior means and deviations.
    PriorSweep(RunArgs),
    /// Pooled identification of specimens drawn from a population.
    Heterogeneity(RunArgs),
    /// Identification with a model other than the generator's.
    Mismatch(RunArgs),
    /// Closed-form linear elastic posterior.
    Analytic(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

impl Verb {
    fn args(&self) -> &RunArgs {
        match self {
            Verb::Generate(a)
            | Verb::Identify(a)
            | Verb::PriorSweep(a)
            | Verb::Heterogeneity(a)
            | Verb::Mismatch(a)
            | Verb::Analytic(a) => a,
        }
    }
}

/// Parses arguments, runs the verb and returns the process exit code:
/// 0 on success, 2 for configuration errors, 3 for numerical failures.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verb.args().verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match run(&cli.verb) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(verb: &Verb) -> Result<()> {
    let args = verb.args();
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.sampler.seed = seed;
        if let Some(g) = &mut cfg.generate {
            g.seed = seed;
        }
        if let Some(p) = &mut cfg.population {
            p.seed = seed;
        }
    }
    cfg.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output".into()))?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    match verb {
        Verb::Generate(_) => cmd_generate(&cfg, &out).map(|_| ()),
        Verb::Identify(_) => cmd_identify(&cfg, &out).map(|_| ()),
        Verb::PriorSweep(_) => cmd_prior_sweep(&cfg, &out),
        Verb::Heterogeneity(_) => cmd_heterogeneity(&cfg, &out),
        Verb::Mismatch(_) => cmd_mismatch(&cfg, &out).map(|_| ()),
        Verb::Analytic(_) => cmd_analytic(&cfg, &out),
    }
}

fn generated(cfg: &RunConfig) -> Result<MeasurementSet> {
    let g = cfg
        .generate
        .as_ref()
        .ok_or_else(|| Error::Config("a generate block is required".into()))?;
    let noise = cfg
        .noise
        .ok_or_else(|| Error::Config("data generation needs a noise block".into()))?;
    let noise = if g.zero_noise {
        match noise {
            NoiseSpec::StressOnly { .. } => NoiseSpec::stress_only(0.0),
            NoiseSpec::StressAndStrain { strain_upper_bound, .. } => NoiseSpec::StressAndStrain {
                s_stress: 0.0,
                s_strain: 0.0,
                strain_upper_bound,
            },
        }
    } else {
        noise
    };
    let params = cfg.generator_params(g)?;
    data::generate(&params, &g.strains.strains(), &noise, g.seed)
}

/// Writes `measurements.csv` and its sidecar.
pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<MeasurementSet> {
    let set = generated(cfg)?;
    data::write_measurements(&set, &out.join("measurements.csv"))?;
    log::info!("wrote {} measurements to {}", set.len(), out.display());
    Ok(set)
}

/// Data from the configured file, or freshly generated (and saved) data.
fn input_data(cfg: &RunConfig, out: &Path) -> Result<MeasurementSet> {
    match (&cfg.data, &cfg.generate) {
        (Some(path), _) => data::read_measurements(path),
        (None, Some(_)) => cmd_generate(cfg, out),
        (None, None) => Err(Error::Config("either data or a generate block is required".into())),
    }
}

fn likelihood(cfg: &RunConfig, data: &MeasurementSet) -> Result<LikelihoodSpec> {
    let noise = cfg.noise.unwrap_or(*data.noise());
    let mut lik = LikelihoodSpec::new(cfg.model, noise)?;
    if let Some(q) = cfg.quadrature {
        if lik.quadrature().is_some() {
            lik = lik.with_quadrature(q)?;
        }
    }
    Ok(lik)
}

fn settings(cfg: &RunConfig) -> IdentifySettings {
    IdentifySettings {
        sampler: cfg.sampler.clone(),
        adaptive: cfg.adaptive,
        chains: cfg.chains,
        credible_level: cfg.credible_level,
        band_strains: cfg.band_strains.as_ref().map(|s| s.strains()).unwrap_or_default(),
    }
}

/// Samples the posterior and writes `summary.json`, `chain.csv`,
/// `band.csv` and `trace.csv`.
pub fn cmd_identify(cfg: &RunConfig, out: &Path) -> Result<Identification> {
    let data = input_data(cfg, out)?;
    identify_and_write(cfg, data, out, json!({}))
}

fn identify_and_write(
    cfg: &RunConfig,
    data: MeasurementSet,
    out: &Path,
    extra: serde_json::Value,
) -> Result<Identification> {
    let lik = likelihood(cfg, &data)?;
    let provenance = data.provenance().to_string();
    let posterior = LogPosterior::new(cfg.prior()?, lik, data)?;
    let id = experiments::identify(&posterior, &settings(cfg))?;
    write_identification(cfg, &id, out, json!({ "data_provenance": provenance, "extra": extra }))?;
    Ok(id)
}

fn write_identification(cfg: &RunConfig, id: &Identification, out: &Path, extra: serde_json::Value) -> Result<()> {
    let names = id.model.param_names();
    let header = json!({ "model": id.model, "parameters": names, "config": cfg });
    sampler::write_chain(&id.chains[0], &out.join("chain.csv"), names, &header)?;

    let mut band = String::from("strain,lower,upper\n");
    for b in &id.band {
        let _ = writeln!(band, "{:.16e},{:.16e},{:.16e}", b.strain, b.lower, b.upper);
    }
    write(&out.join("band.csv"), &band)?;

    let mut trace = String::from("index");
    for n in names {
        let _ = write!(trace, ",{n}_mean,{n}_std");
    }
    trace.push('\n');
    for i in 0..id.chains[0].len() {
        let _ = write!(trace, "{}", i + 1);
        for t in &id.traces {
            let _ = write!(trace, ",{:.16e},{:.16e}", t.running_mean[i], t.running_std[i]);
        }
        trace.push('\n');
    }
    write(&out.join("trace.csv"), &trace)?;

    let summary = json!({
        "format": "tensile-bayes/summary",
        "version": 1,
        "model": id.model,
        "parameters": names,
        "noise_regime": cfg.noise.map(|n| n.regime()),
        "seed": cfg.sampler.seed,
        "chains": id.chains.len(),
        "summary": id.summary,
        "credible_region": id.region,
        "hpd_samples": id.region.hpd_indices.len(),
        "flatness": id.traces.iter().map(|t| t.flatness).collect::<Vec<_>>(),
        "converged": id.is_flat(),
        "analytic": id.analytic,
        "details": extra,
    });
    write_json(&out.join("summary.json"), &summary)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn stress_only_level(set: &MeasurementSet, cfg: &RunConfig) -> Result<f64> {
    let noise = cfg.noise.unwrap_or(*set.noise());
    if noise.regime() != NoiseRegime::StressOnly {
        return Err(Error::Config("the conjugate posterior requires stress-only noise".into()));
    }
    Ok(noise.stress_std())
}

/// Writes `prior_sweep.csv` (one row per grid node and `k`) and a summary
/// of the MAP spread per `k`.
pub fn cmd_prior_sweep(cfg: &RunConfig, out: &Path) -> Result<()> {
    if cfg.model != ModelKind::Le {
        return Err(Error::Config("prior sweeps are defined for the LE model".into()));
    }
    let sweep = cfg
        .prior_sweep
        .as_ref()
        .ok_or_else(|| Error::Config("a prior_sweep block is required".into()))?;
    let data = input_data(cfg, out)?;
    let s_noise = stress_only_level(&data, cfg)?;
    let rows = experiments::prior_sweep(
        data.points(),
        s_noise,
        &sweep.prior_means.values(),
        &sweep.prior_stds.values(),
        &sweep.counts,
    )?;
    let mut csv = String::from("k,prior_mean,prior_std,map\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{:.16e},{:.16e},{:.16e}", r.k, r.prior_mean, r.prior_std, r.map);
    }
    write(&out.join("prior_sweep.csv"), &csv)?;
    let spread: Vec<_> = experiments::map_spread(&rows, &sweep.counts)
        .into_iter()
        .map(|(k, s)| json!({ "k": k, "map_spread": s }))
        .collect();
    write_json(
        &out.join("summary.json"),
        &json!({ "format": "tensile-bayes/prior-sweep", "version": 1, "spread": spread }),
    )
}

/// Writes `specimens.csv`, `heterogeneity.csv` and the pooled
/// identification outputs.
pub fn cmd_heterogeneity(cfg: &RunConfig, out: &Path) -> Result<()> {
    let pop = cfg
        .population
        .as_ref()
        .ok_or_else(|| Error::Config("a population block is required".into()))?;
    let noise = cfg
        .noise
        .ok_or_else(|| Error::Config("heterogeneity runs need a noise block".into()))?;
    let mut lik = LikelihoodSpec::new(cfg.model, noise)?;
    if let (Some(q), Some(_)) = (cfg.quadrature, lik.quadrature()) {
        lik = lik.with_quadrature(q)?;
    }
    let het = experiments::heterogeneity(
        &pop.population(),
        &pop.strains.strains(),
        &noise,
        pop.seed,
        cfg.prior()?,
        lik,
        &settings(cfg),
    )?;

    let names = cfg.model.param_names();
    let mut specimens = format!("specimen,{}\n", names.join(","));
    for (j, p) in het.specimens.iter().enumerate() {
        let vals: Vec<String> = p.as_slice().iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(specimens, "{j},{}", vals.join(","));
    }
    write(&out.join("specimens.csv"), &specimens)?;

    let s = &het.identification.summary;
    let mut table = String::from("quantity,population,posterior\n");
    for (j, n) in names.iter().enumerate() {
        let _ = writeln!(table, "{n}_mean,{:.16e},{:.16e}", pop.mean[j], s.mean[j]);
        let _ = writeln!(table, "{n}_std,{:.16e},{:.16e}", het.population_std[j], s.std[j]);
    }
    if let (Some(a), Some(b)) = (het.population_correlation, het.posterior_correlation) {
        let _ = writeln!(table, "correlation_{}_{},{a:.16e},{b:.16e}", names[0], names[1]);
    }
    write(&out.join("heterogeneity.csv"), &table)?;

    let extra = json!({
        "specimens": het.specimens.len(),
        "population_std": het.population_std,
        "std_ratio": het.std_ratios(),
        "population_correlation": het.population_correlation,
        "posterior_correlation": het.posterior_correlation,
    });
    write_identification(cfg, &het.identification, out, extra)
}

/// Identification on data from a (possibly) different generator model.
pub fn cmd_mismatch(cfg: &RunConfig, out: &Path) -> Result<Identification> {
    let g = cfg
        .generate
        .as_ref()
        .ok_or_else(|| Error::Config("mismatch runs need a generate block".into()))?;
    let generator = g.model.unwrap_or(cfg.model);
    experiments::check_model_match(generator, cfg.model, cfg.allow_model_mismatch)?;
    let data = cmd_generate(cfg, out)?;
    let id = identify_and_write(cfg, data, out, json!({ "generator_model": generator }))?;
    if id.summary.mean.iter().any(|&m| !(m > 0.0)) {
        log::warn!("posterior mean has a nonpositive component: {:?}", id.summary.mean);
    }
    Ok(id)
}

/// Writes the closed-form posterior to `summary.json`.
pub fn cmd_analytic(cfg: &RunConfig, out: &Path) -> Result<()> {
    if cfg.model != ModelKind::Le {
        return Err(Error::Config("the closed form exists only for the LE model".into()));
    }
    let data = input_data(cfg, out)?;
    let s_noise = stress_only_level(&data, cfg)?;
    let prior = cfg.prior()?;
    let post = AnalyticLePosterior::from_points(
        prior.mean()[0],
        prior.covariance()[(0, 0)].sqrt(),
        s_noise,
        data.points(),
    );
    let z = statrs::distribution::ContinuousCDF::inverse_cdf(
        &statrs::distribution::Normal::standard(),
        0.5 + 0.5 * cfg.credible_level.min(1.0 - 1e-16),
    );
    write_json(
        &out.join("summary.json"),
        &json!({
            "format": "tensile-bayes/analytic",
            "version": 1,
            "mean": post.mean,
            "std": post.std,
            "map": post.mean,
            "truncation_mass": post.truncation_mass(),
            "credible_level": cfg.credible_level,
            "credible_interval": [post.mean - z * post.std, post.mean + z * post.std],
            "measurements": data.len(),
        }),
    )
}
