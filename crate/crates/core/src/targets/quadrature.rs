//! Midpoint-rule grid oracle for low-dimensional bounded targets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::support::SupportBox;
use crate::target::TargetDensity;

/// Regular grid of cell centres on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    support: SupportBox,
    counts: Vec<usize>,
    steps: Vec<f64>,
}

impl Grid {
    pub fn new(support: SupportBox, counts: &[usize]) -> Result<Self> {
        if counts.len() != support.dim() {
            return Err(Error::DimensionMismatch { expected: support.dim(), got: counts.len() });
        }
        if counts.iter().any(|c| *c == 0) {
            return Err(Error::Empty("grid axis"));
        }
        let steps = support.widths().iter().zip(counts).map(|(w, c)| w / *c as f64).collect();
        Ok(Grid { support, counts: counts.to_vec(), steps })
    }

    /// Same count along every axis.
    pub fn uniform(support: SupportBox, per_axis: usize) -> Result<Self> {
        let counts = vec![per_axis; support.dim()];
        Grid::new(support, &counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn cell_volume(&self) -> f64 {
        self.steps.iter().product()
    }

    /// Centre of cell `i`; the first axis varies fastest.
    pub fn point(&self, mut i: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let j = i % self.counts[k];
            i /= self.counts[k];
            x.push(self.support.lower()[k] + (j as f64 + 0.5) * self.steps[k]);
        }
        x
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// `f` at every cell centre, in parallel.
    pub fn map<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        (0..self.len()).into_par_iter().map(|i| f(&self.point(i))).collect()
    }
}

/// Grid estimates of `Z`, the mean and the covariance.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub z: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub grid: Grid,
}

/// Does not touch the target's evaluation ledger.
pub fn grid_quadrature(target: &TargetDensity, counts: &[usize]) -> Result<Quadrature> {
    let support = target
        .domain()
        .as_box()
        .cloned()
        .ok_or_else(|| Error::arg("grid quadrature needs a bounded domain"))?;
    let grid = Grid::new(support, counts)?;
    let d = grid.dim();
    let log_vals = grid.map(|x| target.log_pi_uncounted(x));
    let max = log_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    // accumulate in chunks to keep the sums well conditioned
    let (s0, s1, s2) = (0..grid.len())
        .into_par_iter()
        .fold(
            || (0.0, vec![0.0; d], vec![0.0; d * d]),
            |(mut s0, mut s1, mut s2), i| {
                let w = (log_vals[i] - max).exp();
                if w > 0.0 {
                    let x = grid.point(i);
                    s0 += w;
                    for a in 0..d {
                        s1[a] += w * x[a];
                        for b in 0..d {
                            s2[a * d + b] += w * x[a] * x[b];
                        }
                    }
                }
                (s0, s1, s2)
            },
        )
        .reduce(
            || (0.0, vec![0.0; d], vec![0.0; d * d]),
            |(a0, a1, a2), (b0, b1, b2)| {
                (a0 + b0, a1.iter().zip(&b1).map(|(x, y)| x + y).collect(), a2.iter().zip(&b2).map(|(x, y)| x + y).collect())
            },
        );
    let z = s0 * max.exp() * grid.cell_volume();
    let mean: Vec<f64> = s1.iter().map(|v| v / s0).collect();
    let covariance = (0..d).map(|a| (0..d).map(|b| s2[a * d + b] / s0 - mean[a] * mean[b]).collect()).collect();
    Ok(Quadrature { z, mean, covariance, grid })
}
