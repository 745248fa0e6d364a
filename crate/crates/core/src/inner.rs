//! The inner sampling-importance-resampling layer.

use rand::Rng as _;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erf;

use crate::emulator::Emulator;
use crate::error::{Error, Result};
use crate::proposal::Proposal;
use crate::rng::Rng;
use crate::support::SupportBox;
use crate::weights::{log_sum_exp, normalize_log_weights};

/// Below this many auxiliary draws per resampled point a warning is logged.
pub const MIN_POOL_RATIO: usize = 10;

const MAX_RETRIES: usize = 100;

/// One inner batch: auxiliary pool, its log weights and the mass estimate.
#[derive(Debug, Clone)]
pub struct InnerBatch {
    pub aux_samples: Vec<Vec<f64>>,
    pub log_gamma: Vec<f64>,
    pub log_c_hat: f64,
    /// Pool indices of the resampled points.
    pub resampled: Vec<usize>,
}

impl InnerBatch {
    pub fn c_hat(&self) -> f64 {
        self.log_c_hat.exp()
    }

    pub fn resampled_points(&self) -> Vec<Vec<f64>> {
        self.resampled.iter().map(|&i| self.aux_samples[i].clone()).collect()
    }
}

/// `log gamma_l = log pi_hat(z_l) - log q_aux(z_l)`. Never touches the target.
pub fn inner_log_weights(
    emulator: &(impl Emulator + ?Sized),
    aux: &(impl Proposal + ?Sized),
    samples: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Empty("auxiliary samples"));
    }
    samples
        .par_iter()
        .map(|z| {
            let lq = aux.log_density(z);
            if lq == f64::NEG_INFINITY || lq.is_nan() {
                return Err(Error::SupportViolation);
            }
            Ok(emulator.log_eval(z) - lq)
        })
        .collect()
}

/// `log c_hat = log((1/L) sum gamma_l)`.
pub fn estimate_log_normalizer(log_gamma: &[f64]) -> Result<f64> {
    Ok(log_sum_exp(log_gamma)? - (log_gamma.len() as f64).ln())
}

/// Linear-domain `c_hat = (1/L) sum gamma_l`.
pub fn estimate_normalizer(gamma: &[f64]) -> Result<f64> {
    if gamma.is_empty() {
        return Err(Error::Empty("inner weights"));
    }
    Ok(gamma.iter().sum::<f64>() / gamma.len() as f64)
}

/// `n` i.i.d. categorical draws of pool indices with probabilities `gamma / sum gamma`.
pub fn multinomial_resample(log_gamma: &[f64], n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let w = normalize_log_weights(log_gamma)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let alias = WeightedAliasIndex::new(w).map_err(|_| Error::DegenerateWeights)?;
    Ok((0..n).map(|_| alias.sample(rng)).collect())
}

/// Multinomial resampling followed by a Gaussian jitter with per-dimension
/// standard deviation `bandwidth`. Jittered points leaving `domain` are
/// redrawn up to 100 times, then clipped.
pub fn regularized_resample(
    points: &[Vec<f64>],
    log_gamma: &[f64],
    n: usize,
    bandwidth: &[f64],
    domain: Option<&SupportBox>,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    if points.len() != log_gamma.len() {
        return Err(Error::arg("points and weights differ in length"));
    }
    if let Some(p) = points.first() {
        if bandwidth.len() != p.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), got: bandwidth.len() });
        }
    }
    if bandwidth.iter().any(|h| !(*h >= 0.0)) {
        return Err(Error::arg("bandwidth must be non-negative"));
    }
    let idx = multinomial_resample(log_gamma, n, rng)?;
    let mut out = Vec::with_capacity(n);
    for i in idx {
        let base = &points[i];
        let mut x = jitter(base, bandwidth, rng);
        if let Some(b) = domain {
            let mut tries = 0;
            while !b.contains(&x) && tries < MAX_RETRIES {
                x = jitter(base, bandwidth, rng);
                tries += 1;
            }
            b.clip(&mut x);
        }
        out.push(x);
    }
    Ok(out)
}

fn jitter(base: &[f64], h: &[f64], rng: &mut Rng) -> Vec<f64> {
    base.iter().zip(h).map(|(b, s)| b + s * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Silverman's rule `h_d = sigma_d (4 / ((d + 2) L))^(1/(d + 4))` with the
/// `gamma`-weighted standard deviation `sigma_d`.
pub fn silverman_bandwidth(points: &[Vec<f64>], log_gamma: &[f64]) -> Result<Vec<f64>> {
    let w = normalize_log_weights(log_gamma)?;
    let d = points.first().ok_or(Error::Empty("points"))?.len();
    let l = points.len() as f64;
    let factor = (4.0 / ((d as f64 + 2.0) * l)).powf(1.0 / (d as f64 + 4.0));
    Ok((0..d)
        .map(|k| {
            let m: f64 = points.iter().zip(&w).map(|(p, wi)| wi * p[k]).sum();
            let v: f64 = points.iter().zip(&w).map(|(p, wi)| wi * (p[k] - m).powi(2)).sum();
            v.sqrt() * factor
        })
        .collect())
}

/// Draw `l` auxiliary samples, weight them against `emulator`, estimate the
/// mass and resample `n` pool indices.
pub fn sir_step(
    emulator: &(impl Emulator + ?Sized),
    aux: &(impl Proposal + ?Sized),
    l: usize,
    n: usize,
    rng: &mut Rng,
) -> Result<InnerBatch> {
    if l == 0 {
        return Err(Error::Empty("auxiliary pool"));
    }
    if l < MIN_POOL_RATIO * n {
        log::warn!("inner pool L = {l} is below {MIN_POOL_RATIO} x N = {}", MIN_POOL_RATIO * n);
    }
    let aux_samples: Vec<Vec<f64>> = (0..l).map(|_| aux.sample(rng)).collect();
    let log_gamma = inner_log_weights(emulator, aux, &aux_samples)?;
    let log_c_hat = estimate_log_normalizer(&log_gamma)?;
    let resampled = multinomial_resample(&log_gamma, n, rng)?;
    Ok(InnerBatch { aux_samples, log_gamma, log_c_hat, resampled })
}

/// One-dimensional reference density with a closed-form CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticTarget1d {
    Gaussian { mean: f64, std: f64 },
}

impl AnalyticTarget1d {
    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            AnalyticTarget1d::Gaussian { mean, std } => {
                -0.5 * ((x - mean) / std).powi(2) - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            AnalyticTarget1d::Gaussian { mean, std } => 0.5 * (1.0 + erf((x - mean) / (std * std::f64::consts::SQRT_2))),
        }
    }
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// For each pool size `L` in the schedule, resample `n` points from a pool of
/// `L` draws of `aux` weighted against `target`, and report the KS distance
/// of the resampled points to the target CDF.
pub fn sir_bias_probe(
    target: &AnalyticTarget1d,
    aux: &(impl Proposal + ?Sized),
    l_schedule: &[usize],
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<(usize, f64)>> {
    if aux.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: aux.dim() });
    }
    let t = *target;
    let emulator = crate::emulator::FnEmulator::new(1, move |x: &[f64]| t.log_pdf(x[0]));
    l_schedule
        .iter()
        .map(|&l| {
            let batch = sir_step(&emulator, aux, l, n, rng)?;
            let xs: Vec<f64> = batch.resampled.iter().map(|&i| batch.aux_samples[i][0]).collect();
            Ok((l, ks_distance(&xs, |x| target.cdf(x))))
        })
        .collect()
}
