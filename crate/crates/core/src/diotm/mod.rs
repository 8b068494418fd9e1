//! Displacement-interpolation training: interpolants, time-rescaled costs,
//! the HJB / R1 / OTM-gradient penalties, and the alternating update loop.
//! Setting the time distribution to `dirac1` recovers the static
//! semi-dual baseline.

pub mod checkpoint;
pub mod config;
pub mod losses;
pub mod objective;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use config::{LrSchedule, Regularizer, TimeDist, TimeSharing, TrainConfig};
pub use losses::{
    backward_map_loss, clamp_open_time, cost_c, forward_map_loss, hjb_reg, hjb_residual, input_derivatives,
    interpolate, otm_grad_reg, otm_grad_term_backward, otm_grad_term_forward, r1_reg, sample_time, value_loss,
    DerivativeMode, InterpolantBatch, NetValue, ValueFunction, TIME_EPS,
};
pub use objective::{map_objective, value_objective, MapObjective, MapSide, ValueObjective};
pub use trainer::{
    train, train_step, train_with, LossRecord, Networks, StepOutcome, TrainRun, TrainState, TrainedMap,
    MAX_CONSECUTIVE_ABORTS,
};
