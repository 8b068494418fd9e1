//! Command-line surface. Every training flag overrides the same key of the
//! config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use diotm_core::datasets::DatasetName;
use diotm_core::diotm::{LrSchedule, Regularizer, TimeDist, TimeSharing, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "diotm", version, about = "Displacement-interpolation neural optimal transport on 2D benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a distribution (or one side of a dataset pair) to CSV.
    Gen(GenArgs),
    /// Train a run and write its run directory.
    Train(TrainArgs),
    /// Evaluate a trained run against the exact discrete OT oracle.
    Eval(EvalArgs),
    /// Train and evaluate every (regularizer, lambda, repeat) cell.
    Sweep(SweepArgs),
    /// Export point clouds, map segments and log-scale loss curves.
    PlotData(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Distribution name (gaussian, eight-gaussians, ...) or dataset pair name.
    #[arg(long)]
    pub dataset: String,
    /// Which side of a dataset pair to sample.
    #[arg(long, value_enum, default_value = "target")]
    pub side: Side,
    #[arg(long, short = 'n', default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags mirroring the config keys.
#[derive(Debug, Default, Args)]
pub struct ConfigFlags {
    #[arg(long)]
    pub dataset: Option<DatasetName>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_min: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub reg: Option<Regularizer>,
    #[arg(long)]
    pub time_dist: Option<TimeDist>,
    #[arg(long)]
    pub time_sharing: Option<TimeSharing>,
    #[arg(long)]
    pub z_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub ema_decay: Option<f64>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    #[arg(long)]
    pub lr_schedule: Option<LrSchedule>,
}

impl ConfigFlags {
    pub fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            dataset, n_train, n_test, iterations, batch_size, lr, lr_min, alpha, lambda, reg, time_dist,
            time_sharing, z_dim, hidden_dim, ema_decay, fd_step, lr_schedule
        );
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON config; missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ConfigFlags,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Print losses every N steps (0 = quiet).
    #[arg(long, default_value_t = 1000)]
    pub log_every: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Test points per side; defaults to the run's n_test.
    #[arg(long)]
    pub n_eval: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Metrics file; defaults to <run>/metrics.json (metrics_raw.json for raw weights).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Score the EMA weights or the raw final weights.
    #[arg(long, value_enum, default_value = "ema")]
    pub weights: crate::commands::Weights,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base JSON config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ConfigFlags,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,1,10")]
    pub lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "hjb,r1,otm_grad")]
    pub regs: Vec<Regularizer>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Base seed; each cell derives its own.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweep directory (sweep.csv plus one run directory per cell).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub log_every: u64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub n_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Points CSV; losscurve.csv is written next to it. Defaults to <run>/points.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
