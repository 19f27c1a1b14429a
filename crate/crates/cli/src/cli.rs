//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use slowflow::eval::Method;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::report::summary_csv;
use crate::runner;

#[derive(Debug, Parser)]
#[command(name = "slowflow", version, about = "Blind source separation of time series with slow normalizing flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Overrides {
    /// JSON experiment config; flags below override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Comma-separated subset of ICA, FBM+ICA, S-FBM, S-FBM+ICA.
    #[arg(long, global = true, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate sources, mixing and datasets.
    Generate {
        #[arg(long, value_enum)]
        experiment: Option<ExperimentKind>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train the flow models on generated datasets.
    Train {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Separate, score and summarize trained runs.
    Evaluate {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every stage for an experiment.
    Reproduce {
        #[arg(long, value_enum)]
        experiment: ExperimentKind,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write plotting traces from an evaluated run.
    Traces {
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Config from `--config`, else the run directory's stored config, else
/// the defaults for `kind`; then flag overrides.
pub fn resolve_config(kind: Option<ExperimentKind>, o: &Overrides, use_stored: bool) -> Result<ExperimentConfig, CliError> {
    let stored = o.out.as_ref().map(|d| d.join("config.json")).filter(|p| use_stored && p.exists());
    let mut cfg = match (&o.config, stored) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(p)) => ExperimentConfig::load(&p)?,
        (None, None) => ExperimentConfig::for_kind(kind.unwrap_or(ExperimentKind::Structural)),
    };
    if let Some(k) = kind {
        if k != cfg.experiment {
            let out = cfg.out.clone();
            cfg = ExperimentConfig { out, ..ExperimentConfig::for_kind(k) };
        }
    }
    if let Some(s) = o.seed {
        cfg.seeds = vec![s];
    }
    if let Some(out) = &o.out {
        cfg.out = out.clone();
    }
    if let Some(e) = o.epochs {
        cfg.training.epochs = e;
    }
    if let Some(ms) = &o.methods {
        cfg.methods = ms
            .iter()
            .map(|m| m.parse::<Method>().map_err(|e| CliError::Validation(e.to_string())))
            .collect::<Result<_, _>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { experiment, overrides } => {
            let cfg = resolve_config(experiment, &overrides, false)?;
            runner::generate(&cfg)?;
            println!("datasets written to {}", cfg.out.display());
        }
        Command::Train { overrides } => runner::train(&resolve_config(None, &overrides, true)?)?,
        Command::Evaluate { overrides } => {
            let aggs = runner::evaluate(&resolve_config(None, &overrides, true)?)?;
            print!("{}", summary_csv(&aggs));
        }
        Command::Reproduce { experiment, overrides } => {
            let aggs = runner::reproduce(&resolve_config(Some(experiment), &overrides, false)?)?;
            print!("{}", summary_csv(&aggs));
        }
        Command::Traces { overrides } => {
            for p in runner::traces(&resolve_config(None, &overrides, true)?)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
