//! Alternating max-min training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{TimeSharing, TrainConfig};
use super::losses::{sample_time, InterpolantBatch};
use super::objective::{map_objective, value_objective, MapSide};
use crate::datasets::{dataset_pair, DatasetPair, SampleBatch, DIM};
use crate::error::{Error, Result};
use crate::nn::{ema_update, AdamState, Matrix, ParameterStore, TransportNet, ValueNet, DEFAULT_WIDTH};
use crate::ot::TransportMap;

/// Consecutive aborted steps after which training halts.
pub const MAX_CONSECUTIVE_ABORTS: u32 = 3;

/// The three network architectures implied by a config.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    pub value: ValueNet,
    pub forward: TransportNet,
    pub backward: TransportNet,
}

impl Networks {
    pub fn for_config(config: &TrainConfig) -> Result<Self> {
        let w = config.hidden_dim;
        Ok(Self {
            value: ValueNet::new(DIM, w, DEFAULT_WIDTH)?,
            forward: TransportNet::new(DIM, w, config.z_dim)?,
            backward: TransportNet::new(DIM, w, config.z_dim)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub value_loss: f64,
    pub fwd_map_loss: f64,
    pub bwd_map_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub nets: Networks,
    pub params_v: ParameterStore,
    pub params_fwd: ParameterStore,
    pub params_bwd: ParameterStore,
    pub adam_v: AdamState,
    pub adam_fwd: AdamState,
    pub adam_bwd: AdamState,
    pub ema_fwd: ParameterStore,
    pub ema_bwd: ParameterStore,
    pub step: u64,
    pub loss_log: Vec<LossRecord>,
    pub consecutive_aborts: u32,
    pools: Option<(SampleBatch, SampleBatch)>,
}

impl TrainState {
    /// Fresh networks drawn from `rng`, EMA copies equal to the initial weights.
    pub fn init<R: Rng + ?Sized>(config: &TrainConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let nets = Networks::for_config(config)?;
        let params_v = nets.value.init(rng);
        let params_fwd = nets.forward.init(rng);
        let params_bwd = nets.backward.init(rng);
        let pools = if config.n_train > 0 {
            let pair = dataset_pair(config.dataset);
            Some((
                pair.source.sample_with(config.n_train, rng),
                pair.target.sample_with(config.n_train, rng),
            ))
        } else {
            None
        };
        Ok(Self {
            adam_v: AdamState::new(params_v.len()),
            adam_fwd: AdamState::new(params_fwd.len()),
            adam_bwd: AdamState::new(params_bwd.len()),
            ema_fwd: params_fwd.clone(),
            ema_bwd: params_bwd.clone(),
            nets,
            params_v,
            params_fwd,
            params_bwd,
            step: 0,
            loss_log: Vec::new(),
            consecutive_aborts: 0,
            pools,
        })
    }

    /// Reassembles a state from stored parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        config: &TrainConfig,
        params: [ParameterStore; 3],
        adam: [AdamState; 3],
        ema: [ParameterStore; 2],
        step: u64,
    ) -> Result<Self> {
        let nets = Networks::for_config(config)?;
        let [params_v, params_fwd, params_bwd] = params;
        let [adam_v, adam_fwd, adam_bwd] = adam;
        let [ema_fwd, ema_bwd] = ema;
        let layouts = [
            (&params_v, nets.value.layer_shapes()),
            (&params_fwd, nets.forward.layer_shapes()),
            (&params_bwd, nets.backward.layer_shapes()),
            (&ema_fwd, nets.forward.layer_shapes()),
            (&ema_bwd, nets.backward.layer_shapes()),
        ];
        for (p, shapes) in layouts {
            if p.shapes() != shapes.as_slice() {
                return Err(Error::invalid("checkpoint", "parameter layout does not match the config"));
            }
        }
        for (a, p) in [(&adam_v, &params_v), (&adam_fwd, &params_fwd), (&adam_bwd, &params_bwd)] {
            if a.m.len() != p.len() || a.v.len() != p.len() {
                return Err(Error::invalid("checkpoint", "optimizer state does not match parameters"));
            }
        }
        Ok(Self {
            nets,
            params_v,
            params_fwd,
            params_bwd,
            adam_v,
            adam_fwd,
            adam_bwd,
            ema_fwd,
            ema_bwd,
            step,
            loss_log: Vec::new(),
            consecutive_aborts: 0,
            pools: None,
        })
    }

    /// Forward map using the EMA weights.
    pub fn ema_forward_map(&self, noise_seed: u64) -> TrainedMap<'_> {
        TrainedMap {
            net: &self.nets.forward,
            params: &self.ema_fwd,
            noise_seed,
        }
    }

    /// Forward map using the raw weights.
    pub fn raw_forward_map(&self, noise_seed: u64) -> TrainedMap<'_> {
        TrainedMap {
            net: &self.nets.forward,
            params: &self.params_fwd,
            noise_seed,
        }
    }
}

/// A transport network with its weights; auxiliary noise, if any, is drawn
/// from a generator seeded with `noise_seed`.
#[derive(Debug, Clone, Copy)]
pub struct TrainedMap<'a> {
    pub net: &'a TransportNet,
    pub params: &'a ParameterStore,
    pub noise_seed: u64,
}

impl TransportMap for TrainedMap<'_> {
    fn apply(&self, x: &SampleBatch) -> Result<SampleBatch> {
        let noise = (self.net.z_dim > 0).then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
            gaussian_matrix(x.len(), self.net.z_dim, &mut rng)
        });
        SampleBatch::new(self.net.map_batch(self.params, x.as_matrix(), noise.as_ref())?)
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Completed(LossRecord),
    /// Nothing was updated; the reason names the offending quantity.
    Aborted { record: LossRecord, reason: String },
}

fn draw_batch<R: Rng + ?Sized>(
    pool: Option<&SampleBatch>,
    spec: crate::datasets::DistributionSpec,
    n: usize,
    rng: &mut R,
) -> Matrix {
    match pool {
        Some(pool) => {
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..pool.len())).collect();
            pool.as_matrix().select_rows(&idx)
        }
        None => spec.sample_with(n, rng).into_matrix(),
    }
}

fn draw_times<R: Rng + ?Sized>(config: &TrainConfig, n: usize, rng: &mut R) -> Vec<f64> {
    match config.time_sharing {
        TimeSharing::PerElement => (0..n).map(|_| sample_time(config.time_dist, rng)).collect(),
        TimeSharing::PerBatch => vec![sample_time(config.time_dist, rng); n],
    }
}

fn sq_norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum()
}

/// One iteration: sample, build interpolants, one ascent step on the value
/// objective, then one descent step on each map loss against the updated
/// value network, then the EMA update.
///
/// A non-finite loss or gradient norm aborts the step without touching any
/// parameters; the third consecutive abort returns [`Error::Diverged`].
pub fn train_step<R: Rng + ?Sized>(
    state: &mut TrainState,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<StepOutcome> {
    let pair: DatasetPair = dataset_pair(config.dataset);
    let n = config.batch_size;
    let x = draw_batch(state.pools.as_ref().map(|p| &p.0), pair.source, n, rng);
    let y = draw_batch(state.pools.as_ref().map(|p| &p.1), pair.target, n, rng);
    let times = draw_times(config, n, rng);
    let (zx, zy) = if config.z_dim > 0 {
        (
            Some(gaussian_matrix(n, config.z_dim, rng)),
            Some(gaussian_matrix(n, config.z_dim, rng)),
        )
    } else {
        (None, None)
    };
    let lr = config.lr_at(state.step);
    let step = state.step + 1;
    state.step = step;

    let nets = &state.nets;
    let tape_f = nets.forward.record(&state.params_fwd, &x, zx.as_ref())?;
    let tape_b = nets.backward.record(&state.params_bwd, &y, zy.as_ref())?;
    let batch = InterpolantBatch::new(x, tape_f.output(), y, tape_b.output(), times)?;

    let mut record = LossRecord {
        step,
        value_loss: f64::NAN,
        fwd_map_loss: f64::NAN,
        bwd_map_loss: f64::NAN,
    };
    let abort = |state: &mut TrainState, record: LossRecord, reason: String| -> Result<StepOutcome> {
        state.consecutive_aborts += 1;
        state.loss_log.push(record);
        if state.consecutive_aborts >= MAX_CONSECUTIVE_ABORTS {
            return Err(Error::Diverged { step, reason });
        }
        Ok(StepOutcome::Aborted { record, reason })
    };

    if !(tape_f.output().all_finite() && tape_b.output().all_finite()) {
        return abort(state, record, "non-finite transport output".into());
    }

    let vo = value_objective(
        &nets.value,
        &state.params_v,
        &batch,
        config.lambda,
        config.reg,
        config.alpha,
        config.fd_step,
    )?;
    record.value_loss = vo.objective;
    if !vo.objective.is_finite() {
        return abort(state, record, "non-finite value loss".into());
    }
    if !sq_norm(&vo.grad).is_finite() {
        return abort(state, record, "non-finite value gradient norm".into());
    }
    let mut params_v = state.params_v.clone();
    let mut adam_v = state.adam_v.clone();
    adam_v.step(&mut params_v, &vo.grad, lr)?;

    let fo = map_objective(
        MapSide::Forward,
        &nets.value,
        &params_v,
        &nets.forward,
        &state.params_fwd,
        &tape_f,
        &batch.x,
        &batch.times,
        config.alpha,
    )?;
    let bo = map_objective(
        MapSide::Backward,
        &nets.value,
        &params_v,
        &nets.backward,
        &state.params_bwd,
        &tape_b,
        &batch.y,
        &batch.times,
        config.alpha,
    )?;
    record.fwd_map_loss = fo.loss;
    record.bwd_map_loss = bo.loss;
    if !(fo.loss.is_finite() && bo.loss.is_finite()) {
        return abort(state, record, "non-finite map loss".into());
    }
    if !(sq_norm(&fo.grad).is_finite() && sq_norm(&bo.grad).is_finite()) {
        return abort(state, record, "non-finite map gradient norm".into());
    }

    state.params_v = params_v;
    state.adam_v = adam_v;
    state.adam_fwd.step(&mut state.params_fwd, &fo.grad, lr)?;
    state.adam_bwd.step(&mut state.params_bwd, &bo.grad, lr)?;
    ema_update(&mut state.ema_fwd, &state.params_fwd, config.ema_decay)?;
    ema_update(&mut state.ema_bwd, &state.params_bwd, config.ema_decay)?;
    state.consecutive_aborts = 0;
    state.loss_log.push(record);
    Ok(StepOutcome::Completed(record))
}

/// Final state of a run, plus the divergence that stopped it, if any.
#[derive(Debug)]
pub struct TrainRun {
    pub state: TrainState,
    pub divergence: Option<Error>,
}

/// Runs `config.iterations` steps from a fresh seeded state.
pub fn train(config: &TrainConfig) -> Result<TrainRun> {
    train_with(config, |_, _| {})
}

/// As [`train`], calling `observe` after every step.
pub fn train_with<F>(config: &TrainConfig, mut observe: F) -> Result<TrainRun>
where
    F: FnMut(&TrainState, &StepOutcome),
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = TrainState::init(config, &mut rng)?;
    for _ in 0..config.iterations {
        match train_step(&mut state, config, &mut rng) {
            Ok(outcome) => observe(&state, &outcome),
            Err(e @ Error::Diverged { .. }) => {
                return Ok(TrainRun {
                    state,
                    divergence: Some(e),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TrainRun {
        state,
        divergence: None,
    })
}
