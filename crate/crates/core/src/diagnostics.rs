//! Error metrics across runs, grid divergences and node-set fill distance.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nodes::NodeSet;
use crate::targets::quadrature::Grid;

fn check(estimates: &[f64], truth: f64) -> Result<()> {
    if estimates.is_empty() {
        return Err(Error::Empty("estimates"));
    }
    if !truth.is_finite() {
        return Err(Error::arg("truth must be finite"));
    }
    Ok(())
}

fn nonzero(truth: f64) -> Result<f64> {
    if truth == 0.0 {
        Err(Error::arg("relative error needs a nonzero truth"))
    } else {
        Ok(truth.abs())
    }
}

/// `sqrt(mean((est - truth)^2))`.
pub fn rmse(estimates: &[f64], truth: f64) -> Result<f64> {
    check(estimates, truth)?;
    Ok((estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / estimates.len() as f64).sqrt())
}

pub fn relative_rmse(estimates: &[f64], truth: f64) -> Result<f64> {
    Ok(rmse(estimates, truth)? / nonzero(truth)?)
}

/// `mean(|est - truth|)`.
pub fn mae(estimates: &[f64], truth: f64) -> Result<f64> {
    check(estimates, truth)?;
    Ok(estimates.iter().map(|e| (e - truth).abs()).sum::<f64>() / estimates.len() as f64)
}

pub fn relative_mae(estimates: &[f64], truth: f64) -> Result<f64> {
    Ok(mae(estimates, truth)? / nonzero(truth)?)
}

/// `sqrt(mean |est - truth|^2) / |truth|` for vector estimates. With a zero
/// truth vector the absolute value is returned.
pub fn relative_rmse_vec(estimates: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Empty("estimates"));
    }
    if let Some(e) = estimates.iter().find(|e| e.len() != truth.len()) {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: e.len() });
    }
    let ms: f64 = estimates
        .iter()
        .map(|e| e.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum::<f64>()
        / estimates.len() as f64;
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(if norm > 0.0 { ms.sqrt() / norm } else { ms.sqrt() })
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Ok((m, 0.0));
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((m, (var / n).sqrt()))
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// `sqrt(sum (f - g)^2 dV)` over grid cells.
pub fn l2_distance_grid<F, G>(f: F, g: G, grid: &Grid) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    let s: f64 = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            (f(&x) - g(&x)).powi(2)
        })
        .sum();
    (s * grid.cell_volume()).sqrt()
}

/// Pearson divergence `sum (p - q)^2 / q dV`. Returns `+inf` if `q = 0`
/// where `p > 0`; cells where both vanish contribute nothing.
pub fn chi2_divergence_grid<P, Q>(pbar: P, q: Q, grid: &Grid) -> f64
where
    P: Fn(&[f64]) -> f64 + Sync,
    Q: Fn(&[f64]) -> f64 + Sync,
{
    let s: f64 = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let (p, qv) = (pbar(&x), q(&x));
            if qv > 0.0 {
                (p - qv).powi(2) / qv
            } else if p > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    s * grid.cell_volume()
}

/// The divergence and the two upper bounds it must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderBounds {
    pub chi2: f64,
    /// `|p - q|_2 |(p - q) / q|_2`.
    pub l2_product: f64,
    /// `|X| |(p - q) / q|_inf |p - q|_inf`.
    pub sup_product: f64,
}

impl HolderBounds {
    /// Both inequalities, with a relative slack for rounding.
    pub fn holds(&self) -> bool {
        let slack = |b: f64| b * (1.0 + 1e-9) + 1e-300;
        self.chi2 <= slack(self.l2_product) && self.l2_product <= slack(self.sup_product)
    }
}

pub fn holder_bounds<P, Q>(pbar: P, q: Q, grid: &Grid) -> HolderBounds
where
    P: Fn(&[f64]) -> f64 + Sync,
    Q: Fn(&[f64]) -> f64 + Sync,
{
    let cells: Vec<(f64, f64)> = grid.map(|x| pbar(x)).into_iter().zip(grid.map(|x| q(x))).collect();
    let dv = grid.cell_volume();
    let mut chi2 = 0.0;
    let (mut d2, mut r2) = (0.0, 0.0);
    let (mut dinf, mut rinf) = (0.0f64, 0.0f64);
    for &(p, qv) in &cells {
        let d = p - qv;
        let r = if qv > 0.0 { d / qv } else if d != 0.0 { f64::INFINITY } else { 0.0 };
        chi2 += d * r;
        d2 += d * d;
        r2 += r * r;
        dinf = dinf.max(d.abs());
        rinf = rinf.max(r.abs());
    }
    let volume = grid.support().volume();
    HolderBounds { chi2: chi2 * dv, l2_product: (d2 * dv).sqrt() * (r2 * dv).sqrt(), sup_product: volume * rinf * dinf }
}

/// `max_x min_i |x - x_i|` over the grid cell centres.
pub fn fill_distance(nodes: &NodeSet, grid: &Grid) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Empty("node set"));
    }
    if nodes.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: nodes.dim() });
    }
    Ok((0..grid.len())
        .into_par_iter()
        .map(|i| nodes.nearest(&grid.point(i)).expect("non-empty").dist2.sqrt())
        .reduce(|| 0.0, f64::max))
}

/// Short stable digest of a serializable configuration.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

/// One aggregated cell of a metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub algorithm: String,
    pub config_hash: String,
    pub seed_count: usize,
    pub value: f64,
    pub std_error: f64,
    /// Seeds whose run failed and were left out of `value`.
    pub failures: usize,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["metric", "algorithm", "config_hash", "seed_count", "value", "std_error", "failures"])?;
    }
    w.flush()?;
    Ok(())
}
