//! The five subcommands as library functions, plus run-directory layout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use diotm_core::datasets::{dataset_pair, sample, DistributionSpec, SampleBatch};
use diotm_core::diotm::{train_with, Checkpoint, LossRecord, Regularizer, StepOutcome, TrainConfig, TrainState};
use diotm_core::ot::{eval_seeds, evaluate, MetricsReport, TransportMap};
use serde::{Deserialize, Serialize};

use crate::config::{check, serialize_config};
use crate::error::{CliError, Result};

/// Layout of a training run on disk.
///
/// ```text
/// config.json      default-filled config actually used
/// checkpoint.json  final weights, optimizer state and EMA weights
/// loss_log.csv     step,value_loss,fwd_map_loss,bwd_map_loss
/// DIVERGED         present only when training halted; holds the diagnostic
/// metrics.json     written by `eval`
/// points.csv, losscurve.csv   written by `plot-data`
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDirectory {
    pub path: PathBuf,
}

impl RunDirectory {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self { path: path.to_path_buf() })
    }

    /// Opens an existing run; the checkpoint must be present.
    pub fn open(path: &Path) -> Result<Self> {
        let run = Self { path: path.to_path_buf() };
        let ck = run.checkpoint_path();
        if !ck.is_file() {
            return Err(CliError::io(
                ck,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no checkpoint in run directory"),
            ));
        }
        Ok(run)
    }

    pub fn config_path(&self) -> PathBuf {
        self.path.join("config.json")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.path.join("checkpoint.json")
    }

    pub fn loss_log_path(&self) -> PathBuf {
        self.path.join("loss_log.csv")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.path.join("metrics.json")
    }

    pub fn points_path(&self) -> PathBuf {
        self.path.join("points.csv")
    }

    pub fn diverged_marker(&self) -> PathBuf {
        self.path.join("DIVERGED")
    }

    pub fn load_checkpoint(&self) -> Result<Checkpoint> {
        let path = self.checkpoint_path();
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Checkpoint::from_json(&text)?)
    }

    pub fn read_loss_log(&self) -> Result<Vec<LossRecord>> {
        let path = self.loss_log_path();
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| CliError::csv(&path, e))?;
        rdr.deserialize()
            .map(|r| r.map_err(|e| CliError::csv(&path, e)))
            .collect()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Writes `n` draws of `spec` as an `x0,x1` CSV.
pub fn cmd_gen(spec: DistributionSpec, n: usize, seed: u64, out: &Path) -> Result<()> {
    let batch = sample(spec, n, seed);
    let mut w = csv_writer(out)?;
    w.write_record(["x0", "x1"]).map_err(|e| CliError::csv(out, e))?;
    for p in batch.iter() {
        w.write_record([num(p[0]), num(p[1])]).map_err(|e| CliError::csv(out, e))?;
    }
    w.flush().map_err(|e| CliError::io(out, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub run: RunDirectory,
    pub steps: u64,
    /// Step and diagnostic of the halt, if training diverged.
    pub divergence: Option<(u64, String)>,
}

/// Trains from scratch and populates a run directory. Divergence is not an
/// error here: artifacts are still written, marked, and reported in the summary.
/// Progress goes to stderr every `log_every` steps (0 silences it).
pub fn cmd_train(config: &TrainConfig, out: &Path, log_every: u64) -> Result<TrainSummary> {
    check(config)?;
    let run = RunDirectory::create(out)?;
    write_file(&run.config_path(), &serialize_config(config))?;
    let _ = fs::remove_file(run.diverged_marker());

    let result = train_with(config, |state: &TrainState, outcome: &StepOutcome| {
        if let StepOutcome::Aborted { reason, record } = outcome {
            eprintln!("step {}: aborted ({reason})", record.step);
        }
        if log_every > 0 && state.step % log_every == 0 {
            if let Some(r) = state.loss_log.last() {
                eprintln!(
                    "step {:>7}  value {:>12.5}  fwd {:>12.5}  bwd {:>12.5}",
                    r.step, r.value_loss, r.fwd_map_loss, r.bwd_map_loss
                );
            }
        }
    })?;

    let divergence = match &result.divergence {
        Some(diotm_core::Error::Diverged { step, reason }) => Some((*step, reason.clone())),
        Some(other) => Some((result.state.step, other.to_string())),
        None => None,
    };
    let ck = Checkpoint::capture(&result.state, config, divergence.is_some());
    write_file(&run.checkpoint_path(), &ck.to_json()?)?;
    write_loss_log(&run.loss_log_path(), &result.state.loss_log)?;
    if let Some((step, reason)) = &divergence {
        write_file(&run.diverged_marker(), &format!("training diverged at step {step}: {reason}\n"))?;
    }
    Ok(TrainSummary {
        run,
        steps: result.state.step,
        divergence,
    })
}

fn write_loss_log(path: &Path, log: &[LossRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["step", "value_loss", "fwd_map_loss", "bwd_map_loss"])
        .map_err(|e| CliError::csv(path, e))?;
    for r in log {
        w.write_record([r.step.to_string(), num(r.value_loss), num(r.fwd_map_loss), num(r.bwd_map_loss)])
            .map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Which copy of the forward map to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Weights {
    #[default]
    Ema,
    Raw,
}

/// Scores the EMA forward map of a run on fresh test batches and writes the
/// report to `out` (default `<run>/metrics.json`).
pub fn cmd_eval(run_dir: &Path, n_eval: Option<usize>, seed: u64, out: Option<&Path>) -> Result<MetricsReport> {
    cmd_eval_with(run_dir, n_eval, seed, out, Weights::Ema)
}

/// As [`cmd_eval`] with a choice of weights; raw-weight reports default to
/// `<run>/metrics_raw.json`.
pub fn cmd_eval_with(
    run_dir: &Path,
    n_eval: Option<usize>,
    seed: u64,
    out: Option<&Path>,
    weights: Weights,
) -> Result<MetricsReport> {
    let run = RunDirectory::open(run_dir)?;
    let (config, state) = run.load_checkpoint()?.restore()?;
    let n_eval = n_eval.unwrap_or(config.n_test);
    let map = match weights {
        Weights::Ema => state.ema_forward_map(seed),
        Weights::Raw => state.raw_forward_map(seed),
    };
    let report = evaluate(&map, &dataset_pair(config.dataset), n_eval, seed)?;
    let default = match weights {
        Weights::Ema => run.metrics_path(),
        Weights::Raw => run.path.join("metrics_raw.json"),
    };
    let path = out.map(Path::to_path_buf).unwrap_or(default);
    write_file(&path, &metrics_json(&report))?;
    Ok(report)
}

pub fn metrics_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("metrics serialize");
    s.push('\n');
    s
}

/// Writes the point cloud and map segments for plotting to `out`
/// (default `<run>/points.csv`) and `losscurve.csv` next to it.
/// Returns both paths.
pub fn cmd_plot_data(run_dir: &Path, n_points: usize, seed: u64, out: Option<&Path>) -> Result<(PathBuf, PathBuf)> {
    let run = RunDirectory::open(run_dir)?;
    let (config, state) = run.load_checkpoint()?.restore()?;
    let pair = dataset_pair(config.dataset);
    let (sx, sy) = eval_seeds(seed);
    let x = sample(pair.source, n_points, sx);
    let y = sample(pair.target, n_points, sy);
    let tx = state.ema_forward_map(seed).apply(&x)?;

    let points = out.map(Path::to_path_buf).unwrap_or_else(|| run.points_path());
    let mut w = csv_writer(&points)?;
    let err = |e| CliError::csv(&points, e);
    w.write_record(["kind", "x0", "x1", "tx0", "tx1"]).map_err(err)?;
    let rows = |w: &mut csv::Writer<fs::File>, kind: &str, b: &SampleBatch| -> Result<()> {
        for p in b.iter() {
            w.write_record([kind, &num(p[0]), &num(p[1]), "", ""]).map_err(err)?;
        }
        Ok(())
    };
    rows(&mut w, "source", &x)?;
    rows(&mut w, "target", &y)?;
    rows(&mut w, "generated", &tx)?;
    for (a, b) in x.iter().zip(tx.iter()) {
        w.write_record(["mapline", &num(a[0]), &num(a[1]), &num(b[0]), &num(b[1])])
            .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&points, e))?;

    let curve = points
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map(|d| d.join("losscurve.csv"))
        .unwrap_or_else(|| PathBuf::from("losscurve.csv"));
    let log = run.read_loss_log()?;
    let mut w = csv_writer(&curve)?;
    let err = |e| CliError::csv(&curve, e);
    w.write_record(["step", "log10_abs_value_loss", "log10_abs_fwd_loss", "log10_abs_bwd_loss"])
        .map_err(err)?;
    for r in &log {
        w.write_record([r.step.to_string(), log10_abs(r.value_loss), log10_abs(r.fwd_map_loss), log10_abs(r.bwd_map_loss)])
            .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&curve, e))?;
    Ok((points, curve))
}

/// Empty when the loss is zero or non-finite.
fn log10_abs(v: f64) -> String {
    let l = v.abs().log10();
    if l.is_finite() {
        num(l)
    } else {
        String::new()
    }
}

/// Grid of regularizers × λ values × repeats over a base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub lambdas: Vec<f64>,
    pub regs: Vec<Regularizer>,
    pub repeats: usize,
    pub base: TrainConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(CliError::Config {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.lambdas.is_empty() {
            return bad("lambdas", "must not be empty");
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("lambdas", "every value must be finite and non-negative");
        }
        if self.regs.is_empty() {
            return bad("regs", "must not be empty");
        }
        if self.repeats < 1 {
            return bad("repeats", "must be at least 1");
        }
        check(&self.base)
    }

    /// Cells in row order: regularizer, then λ, then repeat.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for &reg in &self.regs {
            for &lambda in &self.lambdas {
                for repeat in 0..self.repeats {
                    let index = out.len() as u64;
                    let mut config = self.base.clone();
                    config.reg = reg;
                    config.lambda = lambda;
                    config.seed = derive_seed(self.base.seed, index);
                    out.push(SweepCell { index, repeat, config });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: u64,
    pub repeat: usize,
    pub config: TrainConfig,
}

/// Per-cell seed from the sweep's base seed and the cell's position.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(base ^ mix(index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub reg: Regularizer,
    pub lambda: f64,
    pub repeat: usize,
    pub seed: u64,
    /// `None` when the cell diverged or failed.
    pub metrics: Option<MetricsReport>,
    pub diverged: bool,
}

/// Runs every cell into `<out>/cells/<index>` and writes `<out>/sweep.csv`
/// row by row. A failing cell is reported on stderr and recorded with empty
/// metrics; it never stops the sweep.
pub fn cmd_sweep(spec: &SweepSpec, out: &Path, log_every: u64) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_file(
        &out.join("sweep_spec.json"),
        &(serde_json::to_string_pretty(spec).expect("spec serializes") + "\n"),
    )?;
    let table = out.join("sweep.csv");
    let mut w = csv_writer(&table)?;
    let err = |e| CliError::csv(&table, e);
    w.write_record(["reg", "lambda", "repeat", "seed", "w2", "l2_map_sq", "l2_map", "diverged"])
        .map_err(err)?;
    w.flush().map_err(|e| CliError::io(&table, e))?;

    let mut rows = Vec::new();
    for cell in spec.cells() {
        let c = &cell.config;
        eprintln!("cell {}: reg={} lambda={} repeat={} seed={}", cell.index, c.reg, c.lambda, cell.repeat, c.seed);
        let dir = out.join("cells").join(format!("{:03}", cell.index));
        let (metrics, diverged) = match run_cell(c, &dir, log_every) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("cell {} failed: {e}", cell.index);
                (None, matches!(e.exit_code(), 2))
            }
        };
        let row = SweepRow {
            reg: c.reg,
            lambda: c.lambda,
            repeat: cell.repeat,
            seed: c.seed,
            metrics,
            diverged,
        };
        let cells = match &row.metrics {
            Some(m) => [num(m.w2), num(m.l2_map_sq), num(m.l2_map)],
            None => [String::new(), String::new(), String::new()],
        };
        w.write_record([
            row.reg.to_string(),
            num(row.lambda),
            row.repeat.to_string(),
            row.seed.to_string(),
            cells[0].clone(),
            cells[1].clone(),
            cells[2].clone(),
            u8::from(row.diverged).to_string(),
        ])
        .map_err(err)?;
        w.flush().map_err(|e| CliError::io(&table, e))?;
        rows.push(row);
    }
    Ok(rows)
}

fn run_cell(config: &TrainConfig, dir: &Path, log_every: u64) -> Result<(Option<MetricsReport>, bool)> {
    let summary = cmd_train(config, dir, log_every)?;
    if let Some((step, reason)) = summary.divergence {
        eprintln!("diverged at step {step}: {reason}");
        return Ok((None, true));
    }
    match cmd_eval(dir, None, config.seed, None) {
        Ok(m) => Ok((Some(m), false)),
        // a finite training run whose map still blows up on test points
        Err(CliError::Core(diotm_core::Error::NonFinite { op })) => {
            eprintln!("non-finite evaluation: {op}");
            let _ = fs::File::create(summary.run.diverged_marker())
                .and_then(|mut f| writeln!(f, "non-finite output at evaluation: {op}"));
            Ok((None, true))
        }
        Err(e) => Err(e),
    }
}
