//! `halfwave`: identity checks, fractional Laplacian evaluation, estimate
//! verification, simulation, lifespan sweeps and fits.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Output;
use crate::config::{Config, ConfigError};

#[derive(Parser)]
#[command(name = "halfwave", version, about = "Blowup diagnostics for the half-wave equation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value settings file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every file the command writes
    #[arg(long, global = true, default_value = "halfwave-out")]
    output_dir: PathBuf,
    /// Override a config key, e.g. --set sim.dt=0.01 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print nothing on success
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the C0 forms and the origin identity for (1+|x|^2)^(-q/2)
    VerifyIdentities {
        #[arg(long, default_value_t = 10)]
        n_max: u32,
    },
    /// Evaluate a fractional Laplacian by both engines
    Fraclap,
    /// Fit and refinement-test the pointwise estimates
    CheckEstimates,
    /// Integrate one configuration until blowup or t_max
    Simulate,
    /// Compare the transport lifespans with their closed form
    AdvectionOracle,
    /// Run an epsilon sweep and fit the configured law (needs --config)
    Sweep,
    /// Fit a lifespan CSV (needs --config with fit.input and fit.law)
    Fit,
    /// Differential inequality diagnostic along one run
    Odi,
}

impl Command {
    fn needs_config(&self) -> bool {
        matches!(self, Command::Sweep | Command::Fit)
    }

    fn name(&self) -> &'static str {
        match self {
            Command::VerifyIdentities { .. } => "verify-identities",
            Command::Fraclap => "fraclap",
            Command::CheckEstimates => "check-estimates",
            Command::Simulate => "simulate",
            Command::AdvectionOracle => "advection-oracle",
            Command::Sweep => "sweep",
            Command::Fit => "fit",
            Command::Odi => "odi",
        }
    }
}

fn load_config(common: &Common, command: &Command) -> Result<Config, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => {
            if !path.is_file() {
                return Err(ConfigError(format!("config file not found: {}", path.display())));
            }
            Config::load(path)?
        }
        None if command.needs_config() => {
            return Err(ConfigError(format!("{} needs --config PATH", command.name())));
        }
        None => Config::default(),
    };
    for pair in &common.overrides {
        cfg.apply_override(pair)?;
    }
    Ok(cfg)
}

fn is_usage(err: &anyhow::Error) -> bool {
    err.downcast_ref::<ConfigError>().is_some()
        || matches!(
            err.downcast_ref::<halfwave_core::Error>(),
            Some(halfwave_core::Error::Config(_))
        )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli.common, &cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("halfwave {}: {e}", cli.command.name());
            return ExitCode::from(2);
        }
    };
    let out = Output::new(&cli.common.output_dir);
    let result = match &cli.command {
        Command::VerifyIdentities { n_max } => commands::verify_identities(*n_max, &out),
        Command::Fraclap => commands::fraclap(&cfg, &out),
        Command::CheckEstimates => commands::check_estimates(&cfg, &out),
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::AdvectionOracle => commands::advection_oracle(&cfg, &out),
        Command::Sweep => commands::sweep(&cfg, &out),
        Command::Fit => commands::fit(&cfg, &out),
        Command::Odi => commands::odi(&cfg, &out),
    };
    match result {
        Ok(report) => {
            if !cli.common.quiet || !report.passed {
                for line in &report.lines {
                    println!("{line}");
                }
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("halfwave {}: {e:#}", cli.command.name());
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}
