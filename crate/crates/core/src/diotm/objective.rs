//! Batched training objectives and their parameter gradients.
//!
//! Input derivatives of `V` inside the regularizers are central finite
//! differences, so every penalty is a plain composition of forward
//! evaluations and one reverse pass over a single stacked query suffices.
//! A stencil for point `p` at time `t` evaluates `V` at
//! `(t, p)`, `(t ± h, p)` and `(t, p ± h·e_k)`; the point and time
//! embeddings are computed once per distinct point and time.

use super::config::Regularizer;
use super::losses::{clamp_open_time, InterpolantBatch};
use crate::error::{Error, Result};
use crate::nn::{Matrix, MlpTape, ParameterStore, TransportNet, ValueNet, ValueQuery};

/// Which stencil rows a regularizer needs.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    time: bool,
    space: bool,
    dim: usize,
}

impl Stencil {
    fn for_reg(reg: Regularizer, lambda: f64, dim: usize) -> Self {
        let active = lambda != 0.0;
        match reg {
            Regularizer::Hjb => Stencil { time: active, space: active, dim },
            Regularizer::R1 | Regularizer::OtmGrad => Stencil { time: false, space: active, dim },
            Regularizer::None => Stencil { time: false, space: false, dim },
        }
    }

    fn rows_per_base(&self) -> usize {
        1 + if self.time { 2 } else { 0 } + if self.space { 2 * self.dim } else { 0 }
    }

    /// Appends the stencil around each `(times[i], points[i])` to `query`.
    fn extend(&self, query: &mut StencilBuilder, times: &[f64], points: &Matrix, h: f64) {
        for (i, &t) in times.iter().enumerate() {
            let p = points.row(i);
            let p0 = query.push_point(p);
            if self.space {
                for k in 0..self.dim {
                    for sign in [1.0, -1.0] {
                        let mut q = p.to_vec();
                        q[k] += sign * h;
                        query.push_point(&q);
                    }
                }
            }
            let t0 = query.push_time(t);
            if self.time {
                query.push_time(t + h);
                query.push_time(t - h);
            }
            query.push_row(p0, t0);
            if self.time {
                query.push_row(p0, t0 + 1);
                query.push_row(p0, t0 + 2);
            }
            if self.space {
                for k in 0..self.dim {
                    query.push_row(p0 + 1 + 2 * k, t0);
                    query.push_row(p0 + 2 + 2 * k, t0);
                }
            }
        }
    }
}

#[derive(Default)]
struct StencilBuilder {
    points: Vec<f64>,
    times: Vec<f64>,
    x_index: Vec<usize>,
    t_index: Vec<usize>,
    dim: usize,
}

impl StencilBuilder {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    fn push_point(&mut self, p: &[f64]) -> usize {
        self.points.extend_from_slice(p);
        self.points.len() / self.dim - 1
    }

    fn push_time(&mut self, t: f64) -> usize {
        self.times.push(t);
        self.times.len() - 1
    }

    fn push_row(&mut self, p: usize, t: usize) {
        self.x_index.push(p);
        self.t_index.push(t);
    }

    fn finish(self) -> ValueQuery {
        let n = self.points.len() / self.dim;
        ValueQuery {
            points: Matrix::from_vec(n, self.dim, self.points),
            times: self.times,
            x_index: self.x_index,
            t_index: self.t_index,
        }
    }
}

/// Finite-difference derivatives read off one stencil block.
struct StencilValues<'a> {
    rows: &'a [f64],
    st: Stencil,
    h: f64,
}

impl StencilValues<'_> {
    fn base(&self) -> f64 {
        self.rows[0]
    }

    fn dt(&self) -> f64 {
        (self.rows[1] - self.rows[2]) / (2.0 * self.h)
    }

    fn space_offset(&self) -> usize {
        1 + if self.st.time { 2 } else { 0 }
    }

    fn grad(&self) -> Vec<f64> {
        let o = self.space_offset();
        (0..self.st.dim)
            .map(|k| (self.rows[o + 2 * k] - self.rows[o + 2 * k + 1]) / (2.0 * self.h))
            .collect()
    }
}

/// Penalty value at one stencil and its derivative with respect to each
/// stencil row, added into `d_rows` scaled by `scale`.
fn penalty(
    reg: Regularizer,
    sv: &StencilValues<'_>,
    alpha: f64,
    otm_cost_grad: Option<(&[f64], f64)>,
    d_rows: &mut [f64],
    scale: f64,
) -> f64 {
    let h2 = 2.0 * sv.h;
    let o = sv.space_offset();
    match reg {
        Regularizer::None => 0.0,
        Regularizer::Hjb => {
            let g = sv.grad();
            let r = 2.0 * alpha * sv.dt() + 0.5 * g.iter().map(|a| a * a).sum::<f64>();
            let s = scale * sign(r);
            d_rows[1] += s * 2.0 * alpha / h2;
            d_rows[2] -= s * 2.0 * alpha / h2;
            for (k, gk) in g.iter().enumerate() {
                d_rows[o + 2 * k] += s * gk / h2;
                d_rows[o + 2 * k + 1] -= s * gk / h2;
            }
            r.abs()
        }
        Regularizer::R1 => {
            let g = sv.grad();
            for (k, gk) in g.iter().enumerate() {
                d_rows[o + 2 * k] += scale * 2.0 * gk / h2;
                d_rows[o + 2 * k + 1] -= scale * 2.0 * gk / h2;
            }
            g.iter().map(|a| a * a).sum()
        }
        Regularizer::OtmGrad => {
            // w = c_grad + σ·∇V with σ = −1 on the source side, +1 on the target side
            let (c_grad, sigma) = otm_cost_grad.expect("otm penalty needs the cost gradient");
            let g = sv.grad();
            let w: Vec<f64> = c_grad.iter().zip(&g).map(|(c, gv)| c + sigma * gv).collect();
            let nw = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nw > 0.0 {
                for (k, wk) in w.iter().enumerate() {
                    let d = scale * sigma * wk / nw / h2;
                    d_rows[o + 2 * k] += d;
                    d_rows[o + 2 * k + 1] -= d;
                }
            }
            nw
        }
    }
}

#[inline]
fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Result of evaluating the value network's objective on one batch.
#[derive(Debug, Clone)]
pub struct ValueObjective {
    /// Mean of `−V(t, x_t) + V(t, y_t) − λR_x − λR_y` (the quantity ascended).
    pub objective: f64,
    /// Mean source-side penalty `R(t, x_t)`.
    pub reg_x: f64,
    /// Mean target-side penalty `R(t, y_t)`.
    pub reg_y: f64,
    /// Gradient of `−objective` with respect to the value parameters.
    pub grad: Vec<f64>,
}

/// Objective and descent gradient for the value network, regularizer
/// derivatives by central differences with step `h`.
pub fn value_objective(
    net: &ValueNet,
    params: &ParameterStore,
    batch: &InterpolantBatch,
    lambda: f64,
    reg: Regularizer,
    alpha: f64,
    h: f64,
) -> Result<ValueObjective> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::invalid("value_objective", "batch must be non-empty"));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid("fd_step", format!("must be positive, got {h}")));
    }
    let dim = net.dim();
    let st = Stencil::for_reg(reg, lambda, dim);
    let mut qb = StencilBuilder::new(dim);
    st.extend(&mut qb, &batch.times, &batch.x_t, h);
    st.extend(&mut qb, &batch.times, &batch.y_t, h);
    let tape = net.record(params, qb.finish())?;
    let values = tape.values();
    let rpb = st.rows_per_base();
    debug_assert_eq!(values.len(), 2 * n * rpb);

    let inv_n = 1.0 / n as f64;
    let mut d_values = vec![0.0; values.len()];
    let (mut sum_vx, mut sum_vy, mut sum_rx, mut sum_ry) = (0.0, 0.0, 0.0, 0.0);
    let (vx_rows, vy_rows) = values.split_at(n * rpb);
    let (dx_rows, dy_rows) = d_values.split_at_mut(n * rpb);
    let mut c_grad = vec![0.0; dim];
    for i in 0..n {
        let block = i * rpb..(i + 1) * rpb;
        let t = clamp_open_time(batch.times[i]);

        // source side: minimize V(t, x_t) + λR
        let sx = StencilValues { rows: &vx_rows[block.clone()], st, h };
        sum_vx += sx.base();
        dx_rows[block.start] += inv_n;
        if lambda != 0.0 {
            for k in 0..dim {
                c_grad[k] = 2.0 * alpha * (batch.x_t.get(i, k) - batch.x.get(i, k)) / t;
            }
            sum_rx += penalty(reg, &sx, alpha, Some((&c_grad, -1.0)), &mut dx_rows[block.clone()], lambda * inv_n);
        }

        // target side: minimize −V(t, y_t) + λR
        let sy = StencilValues { rows: &vy_rows[block.clone()], st, h };
        sum_vy += sy.base();
        dy_rows[block.start] -= inv_n;
        if lambda != 0.0 {
            for k in 0..dim {
                c_grad[k] = 2.0 * alpha * (batch.y_t.get(i, k) - batch.y.get(i, k)) / (1.0 - t);
            }
            sum_ry += penalty(reg, &sy, alpha, Some((&c_grad, 1.0)), &mut dy_rows[block.clone()], lambda * inv_n);
        }
    }
    let objective = (-sum_vx + sum_vy - lambda * (sum_rx + sum_ry)) * inv_n;
    let mut grad = vec![0.0; params.len()];
    net.backward(params, &tape, &d_values, Some(&mut grad), false);
    Ok(ValueObjective {
        objective,
        reg_x: sum_rx * inv_n,
        reg_y: sum_ry * inv_n,
        grad,
    })
}

/// Which transport map a map objective trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapSide {
    /// `T→`: mean of `αt‖x − T(x)‖² − V(t, x_t)`, `x_t = (1 − t)x + tT(x)`.
    Forward,
    /// `T←`: mean of `α(1 − t)‖T(y) − y‖² + V(t, y_t)`, `y_t = (1 − t)T(y) + ty`.
    Backward,
}

#[derive(Debug, Clone)]
pub struct MapObjective {
    pub loss: f64,
    /// Gradient of `loss` with respect to the transport parameters.
    pub grad: Vec<f64>,
}

/// Map loss and its gradient, given a recorded transport pass over `sources`.
pub fn map_objective(
    side: MapSide,
    value_net: &ValueNet,
    value_params: &ParameterStore,
    transport: &TransportNet,
    transport_params: &ParameterStore,
    transport_tape: &MlpTape,
    sources: &Matrix,
    times: &[f64],
    alpha: f64,
) -> Result<MapObjective> {
    let n = times.len();
    if n == 0 || sources.rows() != n {
        return Err(Error::shape("map objective batch", n, sources.rows()));
    }
    let mapped = transport_tape.output();
    let dim = sources.cols();
    let mut inter = Matrix::zeros(n, dim);
    for i in 0..n {
        let t = times[i];
        let (s, m) = (sources.row(i), mapped.row(i));
        for (k, o) in inter.row_mut(i).iter_mut().enumerate() {
            *o = match side {
                MapSide::Forward => (1.0 - t) * s[k] + t * m[k],
                MapSide::Backward => (1.0 - t) * m[k] + t * s[k],
            };
        }
    }
    let vtape = value_net.record(value_params, ValueQuery::paired(times.to_vec(), inter))?;
    let inv_n = 1.0 / n as f64;
    let (v_sign, d_v) = match side {
        MapSide::Forward => (-1.0, -inv_n),
        MapSide::Backward => (1.0, inv_n),
    };
    let d_values = vec![d_v; n];
    let gv = value_net
        .backward(value_params, &vtape, &d_values, None, true)
        .expect("input gradient requested");

    let mut loss = 0.0;
    let mut d_mapped = Matrix::zeros(n, dim);
    for i in 0..n {
        let t = times[i];
        let (s, m) = (sources.row(i), mapped.row(i));
        // weight on the cost term and the chain-rule factor d(interpolant)/d(mapped)
        let (cost_w, chain) = match side {
            MapSide::Forward => (alpha * t, t),
            MapSide::Backward => (alpha * (1.0 - t), 1.0 - t),
        };
        let sq: f64 = s.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
        loss += cost_w * sq + v_sign * vtape.values()[i];
        for (k, d) in d_mapped.row_mut(i).iter_mut().enumerate() {
            *d = inv_n * 2.0 * cost_w * (m[k] - s[k]) + chain * gv.points.get(i, k);
        }
    }
    let mut grad = vec![0.0; transport_params.len()];
    transport.backward(transport_params, transport_tape, d_mapped, &mut grad);
    Ok(MapObjective { loss: loss * inv_n, grad })
}
