//! Command options: flags layered over an optional TOML file layered over
//! defaults. File keys are the flag names in snake_case.

use std::path::{Path, PathBuf};

use clap::Args;
use dpcrm::inference::{ChainConfig, StepSizes};
use dpcrm::io::CountFormat;
use dpcrm::sampling::{DEFAULT_MAX_JUMPS, DEFAULT_REL_MASS_TOL};
use dpcrm::{Family, MixtureTail, ModelSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_ITERS: usize = 20_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATES: usize = 100;
/// Predictive replicates trade truncation accuracy for speed; the
/// remainder is allocated as singletons.
pub const DEFAULT_PREDICT_MAX_JUMPS: usize = 2_000_000;

fn read_file<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn required<T>(v: Option<T>, flag: &str, what: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required {what}")))
}

fn parse_family(s: &str, allowed: &[Family]) -> CliResult<Family> {
    let f: Family = s.parse()?;
    if !allowed.contains(&f) {
        let names: Vec<_> = allowed.iter().map(|f| f.name()).collect();
        return Err(CliError::Usage(format!(
            "model `{s}` is not available here (expected one of {})",
            names.join("|")
        )));
    }
    Ok(f)
}

/// `kind:a:b` with kind `pareto` (scale, shape), `gpd` (scale, shape) or
/// `invgamma` (shape, scale).
pub fn parse_tail(s: &str) -> CliResult<MixtureTail> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Usage(format!("--tail expects kind:a:b, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[2].trim().parse().map_err(|_| bad())?;
    match parts[0].trim().to_ascii_lowercase().as_str() {
        "pareto" => Ok(MixtureTail::Pareto { scale: a, shape: b }),
        "gpd" | "generalized_pareto" => Ok(MixtureTail::GeneralizedPareto { scale: a, shape: b }),
        "invgamma" | "inverse_gamma" => Ok(MixtureTail::InverseGamma { shape: a, scale: b }),
        other => Err(CliError::Usage(format!("unknown tail kind `{other}`"))),
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleOpts {
    /// gbfry | bp | ggp | stable | mixture | py
    #[arg(long)]
    pub model: Option<String>,
    /// Stable index σ (α for py).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Upper power-law index τ (gbfry, bp).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Scale c (gbfry, bp).
    #[arg(long)]
    pub c: Option<f64>,
    /// Exponential tilting ζ (ggp, mixture).
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Total-mass scale η.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Concentration θ (py).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Mass of the heavy-tailed component (mixture).
    #[arg(long)]
    pub mixture_beta: Option<f64>,
    /// Heavy-tailed component as kind:a:b (mixture).
    #[arg(long)]
    pub tail: Option<String>,
    /// Number of observations.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Target expected truncated mass relative to the total.
    #[arg(long)]
    pub rel_mass_tol: Option<f64>,
    #[arg(long)]
    pub max_jumps: Option<usize>,
    /// Skip SVG output.
    #[arg(long)]
    pub no_plots: bool,
    /// TOML file with any of the above keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub model: ModelSpec,
    pub n: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub rel_mass_tol: f64,
    pub max_jumps: usize,
    pub plots: bool,
}

impl SampleOpts {
    fn overlay(self, file: Self) -> Self {
        Self {
            model: self.model.or(file.model),
            sigma: self.sigma.or(file.sigma),
            tau: self.tau.or(file.tau),
            c: self.c.or(file.c),
            zeta: self.zeta.or(file.zeta),
            eta: self.eta.or(file.eta),
            theta: self.theta.or(file.theta),
            mixture_beta: self.mixture_beta.or(file.mixture_beta),
            tail: self.tail.or(file.tail),
            n: self.n.or(file.n),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            rel_mass_tol: self.rel_mass_tol.or(file.rel_mass_tol),
            max_jumps: self.max_jumps.or(file.max_jumps),
            no_plots: self.no_plots || file.no_plots,
            config: self.config,
        }
    }

    pub fn resolve(self) -> CliResult<SampleConfig> {
        let file: Self = read_file(self.config.as_deref())?;
        let o = self.overlay(file);
        let model = o.model_spec()?;
        let n = required(o.n, "n", "")?;
        if n == 0 {
            return Err(CliError::Usage("--n must be positive".into()));
        }
        let rel_mass_tol = o.rel_mass_tol.unwrap_or(DEFAULT_REL_MASS_TOL);
        if !(rel_mass_tol > 0.0 && rel_mass_tol < 1.0) {
            return Err(CliError::Usage("--rel-mass-tol must lie in (0,1)".into()));
        }
        Ok(SampleConfig {
            model,
            n,
            seed: o.seed.unwrap_or(DEFAULT_SEED),
            out: required(o.out, "out", "")?,
            rel_mass_tol,
            max_jumps: o.max_jumps.unwrap_or(DEFAULT_MAX_JUMPS),
            plots: !o.no_plots,
        })
    }

    fn model_spec(&self) -> CliResult<ModelSpec> {
        let name = required(self.model.as_deref(), "model", "")?;
        let family = parse_family(
            name,
            &[
                Family::Gbfry,
                Family::BetaPrime,
                Family::Ggp,
                Family::Stable,
                Family::Mixture,
                Family::PyBaseline,
            ],
        )?;
        let what = format!("for model {family}");
        let sigma = required(self.sigma, "sigma", &what)?;
        let eta = self.eta.unwrap_or(1.0);
        let c = self.c.unwrap_or(1.0);
        let zeta = self.zeta.unwrap_or(1.0);
        let spec = match family {
            Family::Gbfry => ModelSpec::gbfry(sigma, required(self.tau, "tau", &what)?, c, eta),
            Family::BetaPrime => {
                ModelSpec::beta_prime(sigma, required(self.tau, "tau", &what)?, c, eta)
            }
            Family::Ggp => ModelSpec::ggp(sigma, zeta, eta),
            Family::Stable => ModelSpec::stable(sigma, eta),
            Family::Mixture => {
                let tail = parse_tail(&required(self.tail.clone(), "tail", &what)?)?;
                let beta = required(self.mixture_beta, "mixture-beta", &what)?;
                ModelSpec::mixture(sigma, zeta, eta, beta, tail)
            }
            Family::PyBaseline => {
                ModelSpec::pitman_yor(sigma, required(self.theta, "theta", &what)?)
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// How a data file is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// One count per line.
    Lines,
    /// `item,count` rows.
    Csv,
    /// Whitespace-separated node pairs; counts are node degrees.
    Edges,
    /// Whitespace-separated tokens; counts are token frequencies.
    Tokens,
}

impl DataFormat {
    pub fn guess(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => DataFormat::Csv,
            _ => DataFormat::Lines,
        }
    }

    pub fn load(self, path: &Path) -> dpcrm::Result<dpcrm::io::Dataset> {
        match self {
            DataFormat::Lines => dpcrm::io::load_counts(path, CountFormat::Lines),
            DataFormat::Csv => dpcrm::io::load_counts(path, CountFormat::Csv),
            DataFormat::Edges => dpcrm::io::load_edge_list(path),
            DataFormat::Tokens => dpcrm::io::load_token_stream(path),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOpts {
    /// Data file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Defaults to csv for `.csv` files and lines otherwise.
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// gbfry | bp | ggp | py
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Defaults to half the iterations.
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random-walk standard deviation for every scalar block.
    #[arg(long)]
    pub step: Option<f64>,
    /// Leapfrog step size for the latent block.
    #[arg(long)]
    pub hmc_step: Option<f64>,
    #[arg(long)]
    pub leapfrog_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub data: PathBuf,
    pub format: DataFormat,
    pub model: Family,
    pub chains: usize,
    pub out: PathBuf,
    pub chain: ChainConfig,
}

impl FitOpts {
    fn overlay(self, file: Self) -> Self {
        Self {
            data: self.data.or(file.data),
            format: self.format.or(file.format),
            model: self.model.or(file.model),
            iters: self.iters.or(file.iters),
            burnin: self.burnin.or(file.burnin),
            thin: self.thin.or(file.thin),
            seed: self.seed.or(file.seed),
            chains: self.chains.or(file.chains),
            out: self.out.or(file.out),
            step: self.step.or(file.step),
            hmc_step: self.hmc_step.or(file.hmc_step),
            leapfrog_steps: self.leapfrog_steps.or(file.leapfrog_steps),
            config: self.config,
        }
    }

    pub fn resolve(self) -> CliResult<FitConfig> {
        let file: Self = read_file(self.config.as_deref())?;
        let o = self.overlay(file);
        let data = required(o.data, "data", "")?;
        let model = parse_family(
            required(o.model.as_deref(), "model", "")?,
            &[
                Family::Gbfry,
                Family::BetaPrime,
                Family::Ggp,
                Family::PyBaseline,
            ],
        )?;
        let iters = o.iters.unwrap_or(DEFAULT_ITERS);
        let burnin = o.burnin.unwrap_or(iters / 2);
        let thin = o.thin.unwrap_or(1);
        if thin == 0 || burnin >= iters {
            return Err(CliError::Usage(
                "need --thin >= 1 and --burnin < --iters".into(),
            ));
        }
        let chains = o.chains.unwrap_or(1);
        if chains == 0 {
            return Err(CliError::Usage("--chains must be positive".into()));
        }
        let mut chain = ChainConfig::new(iters, burnin, thin, o.seed.unwrap_or(DEFAULT_SEED));
        let defaults = StepSizes::default();
        let step = o.step.unwrap_or(defaults.u);
        chain.steps = StepSizes {
            u: step,
            eta: step,
            sigma: step,
            delta: step,
            hmc_step: o.hmc_step.unwrap_or(defaults.hmc_step),
            leapfrog_steps: o.leapfrog_steps.unwrap_or(defaults.leapfrog_steps),
        };
        Ok(FitConfig {
            format: o.format.unwrap_or_else(|| DataFormat::guess(&data)),
            data,
            model,
            chains,
            out: required(o.out, "out", "")?,
            chain,
        })
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictOpts {
    /// Output directory of a previous `fit`.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Observed data; defaults to the file the fit used.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Size of each replicate; defaults to the observed n.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub rel_mass_tol: Option<f64>,
    #[arg(long)]
    pub max_jumps: Option<usize>,
    /// Defaults to `<fit>/predict`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_plots: bool,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    pub fit: PathBuf,
    pub data: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub replicates: usize,
    pub seed: u64,
    pub n: Option<u64>,
    pub rel_mass_tol: f64,
    pub max_jumps: usize,
    pub out: PathBuf,
    pub plots: bool,
}

impl PredictOpts {
    fn overlay(self, file: Self) -> Self {
        Self {
            fit: self.fit.or(file.fit),
            data: self.data.or(file.data),
            format: self.format.or(file.format),
            replicates: self.replicates.or(file.replicates),
            seed: self.seed.or(file.seed),
            n: self.n.or(file.n),
            rel_mass_tol: self.rel_mass_tol.or(file.rel_mass_tol),
            max_jumps: self.max_jumps.or(file.max_jumps),
            out: self.out.or(file.out),
            no_plots: self.no_plots || file.no_plots,
            config: self.config,
        }
    }

    pub fn resolve(self) -> CliResult<PredictConfig> {
        let file: Self = read_file(self.config.as_deref())?;
        let o = self.overlay(file);
        let fit = required(o.fit, "fit", "")?;
        if o.n == Some(0) {
            return Err(CliError::Usage("--n must be positive".into()));
        }
        Ok(PredictConfig {
            out: o.out.unwrap_or_else(|| fit.join("predict")),
            fit,
            data: o.data,
            format: o.format,
            replicates: o.replicates.unwrap_or(DEFAULT_REPLICATES),
            seed: o.seed.unwrap_or(DEFAULT_SEED),
            n: o.n,
            rel_mass_tol: o.rel_mass_tol.unwrap_or(DEFAULT_REL_MASS_TOL),
            max_jumps: o.max_jumps.unwrap_or(DEFAULT_PREDICT_MAX_JUMPS),
            plots: !o.no_plots,
        })
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOpts {
    /// Fit directories to compare (each optionally holding `predict/`).
    #[arg(long, num_args = 1..)]
    pub fits: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Credible level of the reported intervals.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub fits: Vec<PathBuf>,
    pub out: PathBuf,
    pub level: f64,
}

impl ReportOpts {
    pub fn resolve(self) -> CliResult<ReportConfig> {
        let file: Self = read_file(self.config.as_deref())?;
        let fits = if self.fits.is_empty() {
            file.fits
        } else {
            self.fits
        };
        if fits.is_empty() {
            return Err(CliError::Usage(
                "--fits needs at least one directory".into(),
            ));
        }
        let level = self.level.or(file.level).unwrap_or(0.95);
        if !(level > 0.0 && level < 1.0) {
            return Err(CliError::Usage("--level must lie in (0,1)".into()));
        }
        Ok(ReportConfig {
            fits,
            out: required(self.out.or(file.out), "out", "")?,
            level,
        })
    }
}
