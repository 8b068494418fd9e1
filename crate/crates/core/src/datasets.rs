//! Seeded samplers for the synthetic 2D source/target pairs.
//!
//! All draws go through [`ChaCha8Rng`], so a `(spec, n, seed)` triple gives the
//! same batch on every platform.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const DIM: usize = 2;

/// `n × d` sample block.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    points: Matrix,
}

impl SampleBatch {
    pub fn new(points: Matrix) -> Result<Self> {
        if !points.all_finite() {
            return Err(Error::NonFinite {
                op: "sample batch".into(),
            });
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[[f64; DIM]]) -> Self {
        Self {
            points: Matrix::from_rows(DIM, rows),
        }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter_rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.points
    }

    pub fn into_matrix(self) -> Matrix {
        self.points
    }

    /// Reorders rows so row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> SampleBatch {
        Self {
            points: self.points.select_rows(perm),
        }
    }

    pub fn scaled(&self, s: f64) -> SampleBatch {
        let mut points = self.points.clone();
        points.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        Self { points }
    }
}

/// A 2D distribution from which batches can be drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionSpec {
    /// `N(0, I₂)`.
    Gaussian,
    /// Eight equal-weight modes at radius 12, σ = 0.4.
    EightGaussians,
    /// Modes on the grid `{−16, −8, 0, 8, 16}²`, σ = 0.01.
    TwentyFiveGaussians,
    /// Circles of radius 8 and 16 picked with equal probability, noise σ = 0.2.
    TwoCircles,
    /// Upper half-circle of radius 4 centred at `(0, −1)`, noise σ = 0.2.
    Moon,
    /// Archimedean spiral `r = 0.5 + 1.5u`, `u ∈ [0, 3π]`, noise σ = 0.1.
    Spiral,
}

pub const EIGHT_GAUSSIAN_RADIUS: f64 = 12.0;
pub const EIGHT_GAUSSIAN_SIGMA: f64 = 0.4;
pub const GRID_SPACING: f64 = 8.0;
pub const GRID_SIGMA: f64 = 0.01;
pub const CIRCLE_RADII: [f64; 2] = [8.0, 16.0];
pub const CIRCLE_NOISE: f64 = 0.2;

impl DistributionSpec {
    pub const ALL: [DistributionSpec; 6] = [
        DistributionSpec::Gaussian,
        DistributionSpec::EightGaussians,
        DistributionSpec::TwentyFiveGaussians,
        DistributionSpec::TwoCircles,
        DistributionSpec::Moon,
        DistributionSpec::Spiral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistributionSpec::Gaussian => "gaussian",
            DistributionSpec::EightGaussians => "eight-gaussians",
            DistributionSpec::TwentyFiveGaussians => "twenty-five-gaussians",
            DistributionSpec::TwoCircles => "two-circles",
            DistributionSpec::Moon => "moon",
            DistributionSpec::Spiral => "spiral",
        }
    }

    /// Mixture centres, for the mixture distributions.
    pub fn modes(self) -> Vec<[f64; DIM]> {
        match self {
            DistributionSpec::EightGaussians => (0..8)
                .map(|i| {
                    let a = i as f64 * PI / 4.0;
                    [EIGHT_GAUSSIAN_RADIUS * a.cos(), EIGHT_GAUSSIAN_RADIUS * a.sin()]
                })
                .collect(),
            DistributionSpec::TwentyFiveGaussians => (-2..=2)
                .flat_map(|i| (-2..=2).map(move |j| [GRID_SPACING * i as f64, GRID_SPACING * j as f64]))
                .collect(),
            _ => Vec::new(),
        }
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R, modes: &[[f64; DIM]]) -> [f64; DIM] {
        match self {
            DistributionSpec::Gaussian => [StandardNormal.sample(rng), StandardNormal.sample(rng)],
            DistributionSpec::EightGaussians | DistributionSpec::TwentyFiveGaussians => {
                let sigma = if self == DistributionSpec::EightGaussians {
                    EIGHT_GAUSSIAN_SIGMA
                } else {
                    GRID_SIGMA
                };
                let m = modes[rng.gen_range(0..modes.len())];
                let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
                [m[0] + sigma * a, m[1] + sigma * b]
            }
            DistributionSpec::TwoCircles => {
                let r = CIRCLE_RADII[rng.gen_range(0..2)];
                let a = rng.gen_range(0.0..2.0 * PI);
                let (n0, n1): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
                [r * a.cos() + CIRCLE_NOISE * n0, r * a.sin() + CIRCLE_NOISE * n1]
            }
            DistributionSpec::Moon => {
                let a = rng.gen_range(0.0..PI);
                let (n0, n1): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
                [4.0 * a.cos() + 0.2 * n0, -1.0 + 4.0 * a.sin() + 0.2 * n1]
            }
            DistributionSpec::Spiral => {
                let u = rng.gen_range(0.0..3.0 * PI);
                let r = 0.5 + 1.5 * u;
                let (n0, n1): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
                [r * u.cos() + 0.1 * n0, r * u.sin() + 0.1 * n1]
            }
        }
    }

    /// Draws `n` i.i.d. points from an externally owned generator.
    pub fn sample_with<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> SampleBatch {
        let modes = self.modes();
        let mut points = Matrix::zeros(n, DIM);
        for i in 0..n {
            let p = self.draw(rng, &modes);
            points.row_mut(i).copy_from_slice(&p);
        }
        SampleBatch { points }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistributionSpec::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "distribution",
                name: s.to_string(),
            })
    }
}

/// `n` i.i.d. draws from `spec`, fully determined by `seed`.
pub fn sample(spec: DistributionSpec, n: usize, seed: u64) -> SampleBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    spec.sample_with(n, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetName {
    #[serde(rename = "g-to-8g")]
    GToEightG,
    #[serde(rename = "g-to-25g")]
    GToTwentyFiveG,
    #[serde(rename = "moon-to-spiral")]
    MoonToSpiral,
    #[serde(rename = "g-to-circles")]
    GToCircles,
}

impl DatasetName {
    pub const ALL: [DatasetName; 4] = [
        DatasetName::GToEightG,
        DatasetName::GToTwentyFiveG,
        DatasetName::MoonToSpiral,
        DatasetName::GToCircles,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::GToEightG => "g-to-8g",
            DatasetName::GToTwentyFiveG => "g-to-25g",
            DatasetName::MoonToSpiral => "moon-to-spiral",
            DatasetName::GToCircles => "g-to-circles",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetName::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "dataset",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPair {
    pub name: DatasetName,
    pub source: DistributionSpec,
    pub target: DistributionSpec,
}

pub fn dataset_pair(name: DatasetName) -> DatasetPair {
    use DistributionSpec::*;
    let (source, target) = match name {
        DatasetName::GToEightG => (Gaussian, EightGaussians),
        DatasetName::GToTwentyFiveG => (Gaussian, TwentyFiveGaussians),
        DatasetName::MoonToSpiral => (Moon, Spiral),
        DatasetName::GToCircles => (Gaussian, TwoCircles),
    };
    DatasetPair { name, source, target }
}
