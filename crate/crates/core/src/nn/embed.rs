//! Sinusoidal time embedding.

use crate::error::{Error, Result};

#[inline]
fn frequency(k: usize, dim: usize) -> f64 {
    10000f64.powf(-2.0 * k as f64 / dim as f64)
}

/// `[sin(t·ω₀), cos(t·ω₀), sin(t·ω₁), cos(t·ω₁), …]` with `ω_k = 10000^(−2k/dim)`.
pub fn positional_time_embedding(t: f64, dim: usize) -> Result<Vec<f64>> {
    check_dim(dim)?;
    let mut out = vec![0.0; dim];
    fill_embedding(t, &mut out);
    Ok(out)
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 || dim % 2 != 0 {
        return Err(Error::invalid(
            "time_embed_dim",
            format!("must be even and at least 2, got {dim}"),
        ));
    }
    Ok(())
}

pub(crate) fn fill_embedding(t: f64, out: &mut [f64]) {
    let dim = out.len();
    for k in 0..dim / 2 {
        let (s, c) = (t * frequency(k, dim)).sin_cos();
        out[2 * k] = s;
        out[2 * k + 1] = c;
    }
}

/// Inner product of `upstream` with the derivative of the embedding in `t`.
pub(crate) fn embedding_dt(t: f64, upstream: &[f64]) -> f64 {
    let dim = upstream.len();
    let mut acc = 0.0;
    for k in 0..dim / 2 {
        let w = frequency(k, dim);
        let (s, c) = (t * w).sin_cos();
        acc += upstream[2 * k] * w * c - upstream[2 * k + 1] * w * s;
    }
    acc
}
