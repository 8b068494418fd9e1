//! Exact discrete optimal transport between equal-size uniform empirical
//! measures, and the two map-quality metrics built on it.
//!
//! With uniform weights on `n` points each, an optimal coupling is a
//! permutation, so a dense linear-assignment solve gives the exact plan.

use serde::{Deserialize, Serialize};

use crate::datasets::{DatasetPair, SampleBatch};
use crate::error::{Error, Result};

/// Square matrix of non-negative finite transport costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::shape("cost matrix", n * n, entries.len()));
        }
        if let Some(i) = entries.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid("cost matrix", format!("entry ({}, {}) is not finite", i / n, i % n)));
        }
        if let Some(i) = entries.iter().position(|&c| c < 0.0) {
            return Err(Error::invalid("cost matrix", format!("entry ({}, {}) is negative", i / n, i % n)));
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::shape("cost matrix row", n, r.len()));
        }
        Self::new(n, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn transpose(&self) -> CostMatrix {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j];
            }
        }
        CostMatrix { n, entries }
    }

    /// `Σᵢ C[i][perm[i]]`, summed in row order.
    pub fn cost_of(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// `C[i][j] = ‖xᵢ − yⱼ‖²`.
pub fn build_cost_matrix(x: &SampleBatch, y: &SampleBatch) -> Result<CostMatrix> {
    if x.len() != y.len() {
        return Err(Error::shape("cost matrix batches", x.len(), y.len()));
    }
    if x.dim() != y.dim() {
        return Err(Error::shape("cost matrix dimension", x.dim(), y.dim()));
    }
    let n = x.len();
    let mut entries = Vec::with_capacity(n * n);
    for xi in x.iter() {
        for yj in y.iter() {
            entries.push(xi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum());
        }
    }
    CostMatrix::new(n, entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Row `i` is matched to column `perm[i]`.
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

/// Minimum-cost perfect matching by successive shortest augmenting paths
/// with row/column potentials, `O(n³)`.
pub fn solve_assignment(c: &CostMatrix) -> Assignment {
    let n = c.n;
    if n == 0 {
        return Assignment {
            perm: Vec::new(),
            total_cost: 0.0,
        };
    }
    // 1-based bookkeeping; index 0 is the virtual root column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &c.entries[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = row[j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[row_of[j] - 1] = j - 1;
    }
    let total_cost = c.cost_of(&perm);
    Assignment { perm, total_cost }
}

/// Empirical 2-Wasserstein distance between equal-size point clouds.
pub fn w2(x: &SampleBatch, y: &SampleBatch) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("w2", "empirical measures must be non-empty"));
    }
    let c = build_cost_matrix(x, y)?;
    let a = solve_assignment(&c);
    Ok((a.total_cost / x.len() as f64).sqrt())
}

/// Discrete optimal map on the support of `x`: row `i` of `targets` is the
/// point of `y` that `xᵢ` is sent to.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePairing {
    pub perm: Vec<usize>,
    pub targets: SampleBatch,
}

pub fn oracle_map(x: &SampleBatch, y: &SampleBatch) -> Result<OraclePairing> {
    let c = build_cost_matrix(x, y)?;
    let a = solve_assignment(&c);
    Ok(OraclePairing {
        targets: y.permuted(&a.perm),
        perm: a.perm,
    })
}

/// Mean squared deviation between mapped points and oracle targets, and its root.
pub fn l2_map_error(mapped: &SampleBatch, targets: &SampleBatch) -> Result<(f64, f64)> {
    if mapped.len() != targets.len() {
        return Err(Error::shape("l2 map error batches", targets.len(), mapped.len()));
    }
    if mapped.dim() != targets.dim() {
        return Err(Error::shape("l2 map error dimension", targets.dim(), mapped.dim()));
    }
    if mapped.is_empty() {
        return Err(Error::invalid("l2_map_error", "batches must be non-empty"));
    }
    let sq = mapped
        .iter()
        .zip(targets.iter())
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
        .sum::<f64>()
        / mapped.len() as f64;
    Ok((sq, sq.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub w2: f64,
    pub l2_map_sq: f64,
    pub l2_map: f64,
    pub n_eval: usize,
    pub seed: u64,
    pub dataset: String,
}

/// Anything that pushes a batch of source points forward.
pub trait TransportMap {
    fn apply(&self, x: &SampleBatch) -> Result<SampleBatch>;
}

impl<F> TransportMap for F
where
    F: Fn(&SampleBatch) -> Result<SampleBatch>,
{
    fn apply(&self, x: &SampleBatch) -> Result<SampleBatch> {
        self(x)
    }
}

/// Seeds for the evaluation source and target batches.
pub fn eval_seeds(seed: u64) -> (u64, u64) {
    (seed, seed ^ 0x9e37_79b9_7f4a_7c15)
}

/// Scores `map` on fresh test batches: `W₂(T#X, Y)` and the L2 deviation
/// from the discrete optimal map between `X` and `Y`.
pub fn evaluate<M: TransportMap + ?Sized>(
    map: &M,
    pair: &DatasetPair,
    n_eval: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if n_eval < 2 {
        return Err(Error::invalid("n_eval", format!("must be at least 2, got {n_eval}")));
    }
    let (sx, sy) = eval_seeds(seed);
    let x = crate::datasets::sample(pair.source, n_eval, sx);
    let y = crate::datasets::sample(pair.target, n_eval, sy);
    let mapped = map.apply(&x)?;
    if !mapped.as_matrix().all_finite() {
        return Err(Error::NonFinite {
            op: "transport map during evaluation".into(),
        });
    }
    let w2 = w2(&mapped, &y)?;
    let oracle = oracle_map(&x, &y)?;
    let (l2_map_sq, l2_map) = l2_map_error(&mapped, &oracle.targets)?;
    Ok(MetricsReport {
        w2,
        l2_map_sq,
        l2_map,
        n_eval,
        seed,
        dataset: pair.name.to_string(),
    })
}
