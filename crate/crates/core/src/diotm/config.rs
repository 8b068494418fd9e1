use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::DatasetName;
use crate::error::{Error, Result};

/// Penalty applied to the value network at the generated interpolants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `|2α ∂ₜV + ½‖∇ₓV‖²|`
    Hjb,
    /// `‖∇ₓV‖²`
    R1,
    /// Norm of the gradient of the c-transform integrand in the generated point.
    OtmGrad,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDist {
    Uniform,
    /// `t = 1` always; reduces training to the static semi-dual scheme.
    Dirac1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeSharing {
    /// Independent `t` per batch element.
    PerElement,
    /// One scalar `t` per batch.
    PerBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    Cosine,
}

macro_rules! string_enum {
    ($ty:ident, $kind:literal, { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $name,)+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(Error::Unknown { kind: $kind, name: s.to_string() }),
                }
            }
        }
    };
}

string_enum!(Regularizer, "regularizer", { Hjb => "hjb", R1 => "r1", OtmGrad => "otm_grad", None => "none" });
string_enum!(TimeDist, "time distribution", { Uniform => "uniform", Dirac1 => "dirac1" });
string_enum!(TimeSharing, "time sharing", { PerElement => "per-element", PerBatch => "per-batch" });
string_enum!(LrSchedule, "lr schedule", { Constant => "constant", Cosine => "cosine" });

/// Everything a training run depends on. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetName,
    /// Size of a fixed training pool per side; 0 draws fresh samples every step.
    pub n_train: usize,
    /// Test batch size used for evaluation.
    pub n_test: usize,
    pub iterations: u64,
    pub batch_size: usize,
    pub lr: f64,
    /// Final learning rate of the cosine schedule.
    pub lr_min: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub reg: Regularizer,
    pub time_dist: TimeDist,
    pub time_sharing: TimeSharing,
    pub z_dim: usize,
    pub hidden_dim: usize,
    pub ema_decay: f64,
    pub fd_step: f64,
    pub seed: u64,
    pub lr_schedule: LrSchedule,
}

impl TrainConfig {
    pub const DEFAULT_ALPHA: f64 = 0.1;
    pub const DEFAULT_LAMBDA: f64 = 1.0;
    pub const DEFAULT_LR: f64 = 1e-4;
    pub const DEFAULT_LR_MIN: f64 = 5e-5;
    pub const DEFAULT_BATCH: usize = 400;
    pub const DEFAULT_ITERATIONS: u64 = 120_000;
    pub const DEFAULT_N_TEST: usize = 1000;
    pub const DEFAULT_FD_STEP: f64 = 1e-3;
    pub const DEFAULT_EMA: f64 = 0.999;

    pub fn new(dataset: DatasetName) -> Self {
        Self {
            dataset,
            n_train: 0,
            n_test: Self::DEFAULT_N_TEST,
            iterations: Self::DEFAULT_ITERATIONS,
            batch_size: Self::DEFAULT_BATCH,
            lr: Self::DEFAULT_LR,
            lr_min: Self::DEFAULT_LR_MIN,
            alpha: Self::DEFAULT_ALPHA,
            lambda: Self::DEFAULT_LAMBDA,
            reg: Regularizer::Hjb,
            time_dist: TimeDist::Uniform,
            time_sharing: TimeSharing::PerElement,
            z_dim: 0,
            hidden_dim: crate::nn::DEFAULT_WIDTH,
            ema_decay: Self::DEFAULT_EMA,
            fd_step: Self::DEFAULT_FD_STEP,
            seed: 0,
            lr_schedule: LrSchedule::Constant,
        }
    }

    /// Checks every numeric constraint, naming the first offending key.
    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: String) -> Result<()> {
            Err(Error::InvalidArgument { name, reason })
        }
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if self.iterations < 1 {
            return bad("iterations", "must be at least 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size", "must be at least 1".into());
        }
        if self.n_test < 2 {
            return bad("n_test", format!("must be at least 2, got {}", self.n_test));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad("lr", format!("must be finite and non-negative, got {}", self.lr));
        }
        if !(self.lr_min.is_finite() && self.lr_min >= 0.0) {
            return bad("lr_min", format!("must be finite and non-negative, got {}", self.lr_min));
        }
        if !finite_pos(self.alpha) {
            return bad("alpha", format!("must be positive, got {}", self.alpha));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda", format!("must be non-negative, got {}", self.lambda));
        }
        if !finite_pos(self.fd_step) {
            return bad("fd_step", format!("must be positive, got {}", self.fd_step));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad("ema_decay", format!("must lie in [0, 1), got {}", self.ema_decay));
        }
        if self.hidden_dim < 1 {
            return bad("hidden_dim", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Cosine => crate::nn::cosine_lr(step, self.iterations, self.lr, self.lr_min),
        }
    }
}
