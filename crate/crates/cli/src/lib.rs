//! Command-line front end: config parsing, run directories, and the
//! `gen` / `train` / `eval` / `sweep` / `plot-data` commands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::fs;
use std::path::Path;
use std::str::FromStr;

use diotm_core::datasets::{dataset_pair, DatasetName, DistributionSpec};
use diotm_core::diotm::TrainConfig;

pub use args::{Cli, Command};
pub use commands::{
    cmd_eval, cmd_eval_with, cmd_gen, cmd_plot_data, cmd_sweep, cmd_train, derive_seed, metrics_json, RunDirectory, SweepCell,
    SweepRow, SweepSpec, TrainSummary, Weights,
};
pub use config::{parse_config, serialize_config};
pub use error::{CliError, Result};

use args::{ConfigFlags, Side};

/// Config file (if any) with flag overrides applied, then validated.
pub fn resolve_config(path: Option<&Path>, flags: &ConfigFlags, seed: Option<u64>) -> Result<TrainConfig> {
    let mut c = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse_config(&text, flags.dataset)?
        }
        None => parse_config("{}", flags.dataset)?,
    };
    flags.apply(&mut c);
    if let Some(s) = seed {
        c.seed = s;
    }
    config::check(&c)?;
    Ok(c)
}

fn distribution(name: &str, side: Side) -> Result<DistributionSpec> {
    if let Ok(d) = DistributionSpec::from_str(name) {
        return Ok(d);
    }
    let pair = dataset_pair(DatasetName::from_str(name).map_err(|_| {
        CliError::Usage(format!("unknown dataset or distribution `{name}`"))
    })?);
    Ok(match side {
        Side::Source => pair.source,
        Side::Target => pair.target,
    })
}

/// Executes one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(distribution(&a.dataset, a.side)?, a.n, a.seed, &a.out),
        Command::Train(a) => {
            let config = resolve_config(a.config.as_deref(), &a.flags, a.seed)?;
            let summary = cmd_train(&config, &a.out, a.log_every)?;
            match summary.divergence {
                Some((step, reason)) => Err(CliError::Diverged { step, reason }),
                None => {
                    eprintln!("trained {} steps into {}", summary.steps, summary.run.path.display());
                    Ok(())
                }
            }
        }
        Command::Eval(a) => {
            let report = cmd_eval_with(&a.run, a.n_eval, a.seed, a.out.as_deref(), a.weights)?;
            print!("{}", metrics_json(&report));
            Ok(())
        }
        Command::Sweep(a) => {
            let base = resolve_config(a.config.as_deref(), &a.flags, a.seed)?;
            let spec = SweepSpec {
                lambdas: a.lambdas,
                regs: a.regs,
                repeats: a.repeats,
                base,
            };
            let rows = cmd_sweep(&spec, &a.out, a.log_every)?;
            let diverged = rows.iter().filter(|r| r.diverged).count();
            eprintln!("{} cells, {diverged} diverged; table in {}", rows.len(), a.out.join("sweep.csv").display());
            Ok(())
        }
        Command::PlotData(a) => {
            let (points, curve) = cmd_plot_data(&a.run, a.n_points, a.seed, a.out.as_deref())?;
            eprintln!("wrote {} and {}", points.display(), curve.display());
            Ok(())
        }
    }
}
