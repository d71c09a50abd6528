//! Command-line surface for the stochopt solver.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, CliResult};
use config::RunConfig;

const PRESETS: &str = "Presets:
  pan       stochastic volatility, yearly units: r=0.033 mu_s=4.4 lambda_y=5.3
            y_bar=0.024 sigma_y=0.38 rho=-0.57 (default horizon 10 years)
  barberis  return predictability, monthly units: r=0.0014 sigma=0.0436
            lambda_y=0.0226 y_bar=0.0034 sigma_y=0.0008 rho=-0.935
            (default horizon 240 months)
Rates, horizons and step counts are all in the preset's time unit.

Exit codes: 0 success, 2 invalid input, 3 a bound check was violated,
4 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "stochopt", version, about = "Optimal portfolios under stochastic opportunity sets", after_help = PRESETS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-horizon coefficients and optimal weight (CSV of t, B, A, [C], pi with --out).
    Solve,
    /// Long-run coefficients, equivalent safe rate and optimality conditions.
    Longrun,
    /// Small-noise expansion against the exact long-run values.
    Expand,
    /// Monte Carlo check of the duality bounds; exit 3 if one is violated.
    Verify,
    /// Plot-ready CSV for figure 1-4 (to --out, or stdout).
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        which: u8,
    },
    /// Simulate the finite-horizon optimal policy under the physical measure.
    Simulate {
        /// Write this many sample paths (t,y,x,z) into the --out directory.
        #[arg(long, default_value_t = 0)]
        record: usize,
        /// Compare against a run with half the time step first.
        #[arg(long)]
        check_steps: bool,
    },
}

#[derive(Debug, Args, Default)]
pub struct Opts {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// bs, heston or ko.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// pan or barberis.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Time steps per unit of model time.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Black-Scholes mean excess return.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long = "mu-s", global = true, allow_negative_numbers = true)]
    pub mu_s: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long = "lambda-y", global = true, allow_negative_numbers = true)]
    pub lambda_y: Option<f64>,
    #[arg(long = "y-bar", global = true, allow_negative_numbers = true)]
    pub y_bar: Option<f64>,
    #[arg(long = "sigma-y", global = true, allow_negative_numbers = true)]
    pub sigma_y: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Initial factor value (defaults to y_bar).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub y0: Option<f64>,
}

impl Opts {
    /// Config file first, then flags on top.
    pub fn to_config(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(m) = &self.model {
            c.set("model", m)?;
        }
        if let Some(p) = &self.preset {
            c.set("preset", p)?;
        }
        let nums = [
            ("gamma", self.gamma),
            ("horizon", self.horizon),
            ("r", self.r),
            ("mu", self.mu),
            ("mu_s", self.mu_s),
            ("sigma", self.sigma),
            ("lambda_y", self.lambda_y),
            ("y_bar", self.y_bar),
            ("sigma_y", self.sigma_y),
            ("rho", self.rho),
            ("y0", self.y0),
        ];
        for (k, v) in nums {
            if let Some(v) = v {
                c.set(k, &format!("{v:?}"))?;
            }
        }
        if let Some(v) = self.paths {
            c.paths = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out = Some(v.clone());
        }
        Ok(c)
    }
}

/// Caps rayon's worker count from `STOCHOPT_THREADS` if set.
pub fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("STOCHOPT_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            stochopt::Error::InvalidConfig(format!("STOCHOPT_THREADS = `{v}` is not a positive integer"))
        })?;
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<String> {
    init_threads()?;
    let c = cli.opts.to_config()?;
    match &cli.command {
        Command::Solve => commands::solve(&c),
        Command::Longrun => commands::longrun(&c),
        Command::Expand => commands::expand(&c),
        Command::Verify => commands::verify(&c),
        Command::Figure { which } => commands::figure(*which, &c),
        Command::Simulate { record, check_steps } => commands::simulate(&c, *record, *check_steps),
    }
}

pub fn exit_code(result: &Result<String, CliError>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) => e.exit_code(),
    }
}
