//! Versioned JSON checkpoints.
//!
//! Layout (version 1), a single JSON object:
//!
//! ```text
//! format      "diotm-checkpoint"
//! version     1
//! step        completed training steps
//! diverged    true when written after a halted run
//! config      the full TrainConfig
//! value, forward, backward          {"values": [...], "shapes": [{"rows","cols"}...]}
//! adam_value, adam_forward, adam_backward   {"m","v","step","beta1","beta2","eps"}
//! ema_forward, ema_backward          same layout as the parameter stores
//! ```
//!
//! Floats are written in shortest round-trip decimal form, so a reload is
//! bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::trainer::TrainState;
use crate::error::{Error, Result};
use crate::nn::{AdamState, ParameterStore};

pub const FORMAT: &str = "diotm-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub step: u64,
    pub diverged: bool,
    pub config: TrainConfig,
    pub value: ParameterStore,
    pub forward: ParameterStore,
    pub backward: ParameterStore,
    pub adam_value: AdamState,
    pub adam_forward: AdamState,
    pub adam_backward: AdamState,
    pub ema_forward: ParameterStore,
    pub ema_backward: ParameterStore,
}

impl Checkpoint {
    pub fn capture(state: &TrainState, config: &TrainConfig, diverged: bool) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            step: state.step,
            diverged,
            config: config.clone(),
            value: state.params_v.clone(),
            forward: state.params_fwd.clone(),
            backward: state.params_bwd.clone(),
            adam_value: state.adam_v.clone(),
            adam_forward: state.adam_fwd.clone(),
            adam_backward: state.adam_bwd.clone(),
            ema_forward: state.ema_fwd.clone(),
            ema_backward: state.ema_bwd.clone(),
        }
    }

    pub fn restore(self) -> Result<(TrainConfig, TrainState)> {
        let state = TrainState::from_parts(
            &self.config,
            [self.value, self.forward, self.backward],
            [self.adam_value, self.adam_forward, self.adam_backward],
            [self.ema_forward, self.ema_backward],
            self.step,
        )?;
        Ok((self.config, state))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != FORMAT {
            return Err(Error::invalid("checkpoint", format!("unexpected format tag `{}`", ck.format)));
        }
        if ck.version != VERSION {
            return Err(Error::invalid("checkpoint", format!("unsupported version {}", ck.version)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
