//! Pointwise and batch-mean forms of the interpolation, cost, regularizer and
//! loss terms, written against any [`ValueFunction`].
//!
//! These are the reference evaluations; the trainer uses the batched stencil
//! objectives in `objective`, which are checked against these.

use rand::Rng;

use super::config::{Regularizer, TimeDist};
use crate::error::{Error, Result};
use crate::nn::{Matrix, ParameterStore, ValueNet};

/// A scalar field `V(t, x)` with input derivatives.
pub trait ValueFunction {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, x: &[f64]) -> Result<f64>;
    /// `(∂V/∂t, ∇ₓV)`.
    fn grad_input(&self, t: f64, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// A value network bound to its parameters.
#[derive(Debug, Clone, Copy)]
pub struct NetValue<'a> {
    pub net: &'a ValueNet,
    pub params: &'a ParameterStore,
}

impl<'a> NetValue<'a> {
    pub fn new(net: &'a ValueNet, params: &'a ParameterStore) -> Self {
        Self { net, params }
    }
}

impl ValueFunction for NetValue<'_> {
    fn dim(&self) -> usize {
        self.net.dim()
    }

    fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.net.forward_value(self.params, t, x)
    }

    fn grad_input(&self, t: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.net.grad_input_value(self.params, t, x)
    }
}

/// How `∂ₜV` and `∇ₓV` are obtained inside the regularizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    /// Central differences with the given step.
    FiniteDifference(f64),
}

pub fn input_derivatives<V: ValueFunction + ?Sized>(
    v: &V,
    t: f64,
    x: &[f64],
    mode: DerivativeMode,
) -> Result<(f64, Vec<f64>)> {
    match mode {
        DerivativeMode::Analytic => v.grad_input(t, x),
        DerivativeMode::FiniteDifference(h) => {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::invalid("fd_step", format!("must be positive, got {h}")));
            }
            let dt = (v.value(t + h, x)? - v.value(t - h, x)?) / (2.0 * h);
            let mut probe = x.to_vec();
            let mut grad = Vec::with_capacity(x.len());
            for k in 0..x.len() {
                probe[k] = x[k] + h;
                let up = v.value(t, &probe)?;
                probe[k] = x[k] - h;
                let down = v.value(t, &probe)?;
                probe[k] = x[k];
                grad.push((up - down) / (2.0 * h));
            }
            Ok((dt, grad))
        }
    }
}

fn check_unit_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("t", format!("must lie in [0, 1], got {t}")));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `(1 − t)·x + t·tx`.
pub fn interpolate(x: &[f64], tx: &[f64], t: f64) -> Result<Vec<f64>> {
    if x.len() != tx.len() {
        return Err(Error::shape("interpolate", x.len(), tx.len()));
    }
    check_unit_time(t)?;
    Ok(x.iter().zip(tx).map(|(a, b)| (1.0 - t) * a + t * b).collect())
}

/// `c_{s,t}(x, y) = α‖x − y‖² / (t − s)`.
pub fn cost_c(s: f64, t: f64, x: &[f64], y: &[f64], alpha: f64) -> Result<f64> {
    if s >= t {
        return Err(Error::invalid("cost_c", format!("requires s < t, got s={s}, t={t}")));
    }
    if x.len() != y.len() {
        return Err(Error::shape("cost_c", x.len(), y.len()));
    }
    Ok(alpha * sq_dist(x, y) / (t - s))
}

/// `2α ∂ₜV(t, x) + ½‖∇ₓV(t, x)‖²`.
pub fn hjb_residual<V: ValueFunction + ?Sized>(
    v: &V,
    t: f64,
    x: &[f64],
    alpha: f64,
    mode: DerivativeMode,
) -> Result<f64> {
    let (dt, grad) = input_derivatives(v, t, x, mode)?;
    Ok(2.0 * alpha * dt + 0.5 * grad.iter().map(|g| g * g).sum::<f64>())
}

fn check_batch(times: &[f64], points: &Matrix, name: &'static str) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid(name, "batch must be non-empty"));
    }
    if times.len() != points.rows() {
        return Err(Error::shape(name, points.rows(), times.len()));
    }
    Ok(())
}

/// Batch mean of `|hjb_residual|`.
pub fn hjb_reg<V: ValueFunction + ?Sized>(
    v: &V,
    times: &[f64],
    points: &Matrix,
    alpha: f64,
    mode: DerivativeMode,
) -> Result<f64> {
    check_batch(times, points, "hjb_reg")?;
    let mut acc = 0.0;
    for (i, &t) in times.iter().enumerate() {
        acc += hjb_residual(v, t, points.row(i), alpha, mode)?.abs();
    }
    Ok(acc / times.len() as f64)
}

/// Batch mean of `‖∇ₓV(t, x)‖²`.
pub fn r1_reg<V: ValueFunction + ?Sized>(v: &V, times: &[f64], points: &Matrix, mode: DerivativeMode) -> Result<f64> {
    check_batch(times, points, "r1_reg")?;
    let mut acc = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let (_, g) = input_derivatives(v, t, points.row(i), mode)?;
        acc += g.iter().map(|a| a * a).sum::<f64>();
    }
    Ok(acc / times.len() as f64)
}

/// Source-side term `‖∇_{x_t}(c_{0,t}(x, x_t) − V(t, x_t))‖`.
pub fn otm_grad_term_forward<V: ValueFunction + ?Sized>(
    v: &V,
    x: &[f64],
    x_t: &[f64],
    t: f64,
    alpha: f64,
    mode: DerivativeMode,
) -> Result<f64> {
    check_open_time(t)?;
    let (_, g) = input_derivatives(v, t, x_t, mode)?;
    let w: Vec<f64> = x_t
        .iter()
        .zip(x)
        .zip(&g)
        .map(|((a, b), gv)| 2.0 * alpha * (a - b) / t - gv)
        .collect();
    Ok(norm(&w))
}

/// Target-side term `‖∇_{y_t}(c_{t,1}(y_t, y) + V(t, y_t))‖`.
pub fn otm_grad_term_backward<V: ValueFunction + ?Sized>(
    v: &V,
    y: &[f64],
    y_t: &[f64],
    t: f64,
    alpha: f64,
    mode: DerivativeMode,
) -> Result<f64> {
    check_open_time(t)?;
    let (_, g) = input_derivatives(v, t, y_t, mode)?;
    let w: Vec<f64> = y_t
        .iter()
        .zip(y)
        .zip(&g)
        .map(|((a, b), gv)| 2.0 * alpha * (a - b) / (1.0 - t) + gv)
        .collect();
    Ok(norm(&w))
}

fn check_open_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid("t", format!("must lie in (0, 1), got {t}")));
    }
    Ok(())
}

/// Sources, interpolants and times of one training batch.
#[derive(Debug, Clone)]
pub struct InterpolantBatch {
    pub x: Matrix,
    pub y: Matrix,
    /// `(1 − t)·x + t·T→(x)`
    pub x_t: Matrix,
    /// `(1 − t)·T←(y) + t·y`
    pub y_t: Matrix,
    pub times: Vec<f64>,
}

impl InterpolantBatch {
    /// Builds both interpolants from source points and their images.
    pub fn new(x: Matrix, tx: &Matrix, y: Matrix, ty: &Matrix, times: Vec<f64>) -> Result<Self> {
        let n = times.len();
        for (m, name) in [(&x, "x"), (tx, "T(x)"), (&y, "y"), (ty, "T(y)")] {
            if m.rows() != n {
                return Err(Error::invalid(
                    "interpolant batch",
                    format!("{name} has {} rows, expected {n}", m.rows()),
                ));
            }
        }
        let mut x_t = Matrix::zeros(n, x.cols());
        let mut y_t = Matrix::zeros(n, y.cols());
        for (i, &t) in times.iter().enumerate() {
            x_t.row_mut(i).copy_from_slice(&interpolate(x.row(i), tx.row(i), t)?);
            // the target side runs from T←(y) at t = 0 to y at t = 1
            y_t.row_mut(i).copy_from_slice(&interpolate(ty.row(i), y.row(i), t)?);
        }
        Ok(Self { x, y, x_t, y_t, times })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Per-element `(R(t, x_t), R(t, y_t))` for the chosen regularizer.
pub fn regularizer_terms<V: ValueFunction + ?Sized>(
    v: &V,
    batch: &InterpolantBatch,
    i: usize,
    reg: Regularizer,
    alpha: f64,
    mode: DerivativeMode,
) -> Result<(f64, f64)> {
    let t = batch.times[i];
    let (xt, yt) = (batch.x_t.row(i), batch.y_t.row(i));
    Ok(match reg {
        Regularizer::None => (0.0, 0.0),
        Regularizer::Hjb => (
            hjb_residual(v, t, xt, alpha, mode)?.abs(),
            hjb_residual(v, t, yt, alpha, mode)?.abs(),
        ),
        Regularizer::R1 => {
            let gx = input_derivatives(v, t, xt, mode)?.1;
            let gy = input_derivatives(v, t, yt, mode)?.1;
            (gx.iter().map(|a| a * a).sum(), gy.iter().map(|a| a * a).sum())
        }
        Regularizer::OtmGrad => {
            let tc = clamp_open_time(t);
            (
                otm_grad_term_forward(v, batch.x.row(i), xt, tc, alpha, mode)?,
                otm_grad_term_backward(v, batch.y.row(i), yt, tc, alpha, mode)?,
            )
        }
    })
}

/// Batch mean of the source- plus target-side OTM gradient penalty.
pub fn otm_grad_reg<V: ValueFunction + ?Sized>(
    v: &V,
    batch: &InterpolantBatch,
    alpha: f64,
    mode: DerivativeMode,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("otm_grad_reg", "batch must be non-empty"));
    }
    let mut acc = 0.0;
    for (i, &t) in batch.times.iter().enumerate() {
        check_open_time(t)?;
        acc += otm_grad_term_forward(v, batch.x.row(i), batch.x_t.row(i), t, alpha, mode)?;
        acc += otm_grad_term_backward(v, batch.y.row(i), batch.y_t.row(i), t, alpha, mode)?;
    }
    Ok(acc / batch.len() as f64)
}

/// Times used inside `c_{s,t}` are kept this far from 0 and 1.
pub const TIME_EPS: f64 = 1e-4;

pub fn clamp_open_time(t: f64) -> f64 {
    t.clamp(TIME_EPS, 1.0 - TIME_EPS)
}

/// Objective the value network ascends:
/// mean of `−V(t, x_t) + V(t, y_t) − λR(t, x_t) − λR(t, y_t)`.
pub fn value_loss<V: ValueFunction + ?Sized>(
    v: &V,
    batch: &InterpolantBatch,
    lambda: f64,
    reg: Regularizer,
    alpha: f64,
    mode: DerivativeMode,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("value_loss", "batch must be non-empty"));
    }
    let mut acc = 0.0;
    for (i, &t) in batch.times.iter().enumerate() {
        let vx = v.value(t, batch.x_t.row(i))?;
        let vy = v.value(t, batch.y_t.row(i))?;
        let (rx, ry) = if lambda == 0.0 {
            (0.0, 0.0)
        } else {
            regularizer_terms(v, batch, i, reg, alpha, mode)?
        };
        acc += -vx + vy - lambda * rx - lambda * ry;
    }
    Ok(acc / batch.len() as f64)
}

fn check_map_batch(x: &Matrix, tx: &Matrix, times: &[f64]) -> Result<()> {
    if x.rows() != times.len() || tx.rows() != times.len() {
        return Err(Error::shape("map loss batch", times.len(), x.rows().min(tx.rows())));
    }
    if x.cols() != tx.cols() {
        return Err(Error::shape("map loss dimension", x.cols(), tx.cols()));
    }
    if times.is_empty() {
        return Err(Error::invalid("map loss", "batch must be non-empty"));
    }
    Ok(())
}

/// Mean of `αt‖x − T→(x)‖² − V(t, x_t)`.
pub fn forward_map_loss<V: ValueFunction + ?Sized>(
    v: &V,
    x: &Matrix,
    tx: &Matrix,
    times: &[f64],
    alpha: f64,
) -> Result<f64> {
    check_map_batch(x, tx, times)?;
    let mut acc = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let xt = interpolate(x.row(i), tx.row(i), t)?;
        acc += alpha * t * sq_dist(x.row(i), tx.row(i)) - v.value(t, &xt)?;
    }
    Ok(acc / times.len() as f64)
}

/// Mean of `α(1 − t)‖T←(y) − y‖² + V(t, y_t)`.
pub fn backward_map_loss<V: ValueFunction + ?Sized>(
    v: &V,
    y: &Matrix,
    ty: &Matrix,
    times: &[f64],
    alpha: f64,
) -> Result<f64> {
    check_map_batch(y, ty, times)?;
    let mut acc = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let yt = interpolate(ty.row(i), y.row(i), t)?;
        acc += alpha * (1.0 - t) * sq_dist(ty.row(i), y.row(i)) + v.value(t, &yt)?;
    }
    Ok(acc / times.len() as f64)
}

/// One draw from the time distribution.
pub fn sample_time<R: Rng + ?Sized>(dist: TimeDist, rng: &mut R) -> f64 {
    match dist {
        TimeDist::Uniform => rng.gen::<f64>(),
        TimeDist::Dirac1 => 1.0,
    }
}
