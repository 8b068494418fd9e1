//! Adam, parameter EMA and the cosine learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::params::ParameterStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Fresh state with `(β₁, β₂) = (0, 0.9)` and `eps = 1e-8`.
    pub fn new(len: usize) -> Self {
        Self::with_betas(len, 0.0, 0.9, 1e-8)
    }

    pub fn with_betas(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    /// One bias-corrected Adam update. Refuses (leaving state and parameters
    /// untouched) when any gradient entry is not finite.
    pub fn step(&mut self, params: &mut ParameterStore, grads: &[f64], lr: f64) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::shape("adam gradient", params.len(), grads.len()));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                op: format!("adam step (gradient entry {i})"),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, &g), m), v) in params
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// `lr_min + ½(lr0 − lr_min)(1 + cos(π·step/total))`, clamped to `lr_min` past the end.
pub fn cosine_lr(step: u64, total_steps: u64, lr0: f64, lr_min: f64) -> f64 {
    if total_steps == 0 || step >= total_steps {
        return lr_min;
    }
    let frac = step as f64 / total_steps as f64;
    lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// In-place `avg ← decay·avg + (1 − decay)·current`.
pub fn ema_update(avg: &mut ParameterStore, current: &ParameterStore, decay: f64) -> Result<()> {
    if !avg.same_layout(current) {
        return Err(Error::shape("ema parameters", avg.len(), current.len()));
    }
    if !(0.0..1.0).contains(&decay) {
        return Err(Error::invalid("ema_decay", format!("must lie in [0, 1), got {decay}")));
    }
    for (a, &c) in avg.values_mut().iter_mut().zip(current.values()) {
        *a = decay * *a + (1.0 - decay) * c;
    }
    Ok(())
}
