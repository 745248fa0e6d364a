//! Importance-weight algebra and the weighted particle set.
//!
//! Weights are carried in the log domain and only exponentiated after
//! subtracting their maximum, so likelihoods built from thousands of
//! observations do not underflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `log(sum(exp(v)))` with max-subtraction. An all `-inf` input yields `-inf`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("log_sum_exp needs at least one value"));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if max == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Normalize non-negative linear weights so they sum to one.
pub fn normalize_weights(w: &[f64]) -> Result<Vec<f64>> {
    if w.is_empty() {
        return Err(Error::Empty("weights"));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::arg("weights must be finite and non-negative"));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(w.iter().map(|v| v / total).collect())
}

/// Normalize log-domain weights into linear normalized weights.
pub fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let lse = log_sum_exp(log_w)?;
    if lse == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    if !lse.is_finite() {
        return Err(Error::arg("log weights must not contain +inf or NaN"));
    }
    Ok(log_w.iter().map(|v| (v - lse).exp()).collect())
}

/// Arithmetic mean of unnormalized weights: the evidence estimate `Z`.
pub fn evidence_estimate(w: &[f64]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::Empty("weights"));
    }
    Ok(w.iter().sum::<f64>() / w.len() as f64)
}

/// Log of [`evidence_estimate`] computed from log weights.
pub fn log_evidence_estimate(log_w: &[f64]) -> Result<f64> {
    Ok(log_sum_exp(log_w)? - (log_w.len() as f64).ln())
}

/// `1 / sum(w_bar^2)` for normalized weights.
pub fn effective_sample_size(w_bar: &[f64]) -> f64 {
    let s: f64 = w_bar.iter().map(|w| w * w).sum();
    if s > 0.0 {
        1.0 / s
    } else {
        0.0
    }
}

/// One weighted draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: Vec<f64>,
    /// Log of the unnormalized importance weight.
    pub log_weight: f64,
    /// Log of the unnormalized target at `x`.
    pub log_target: f64,
    /// Iteration tag (1-based; 0 for non-iterative samplers).
    pub iteration: usize,
    /// Sample index within the iteration.
    pub index: usize,
}

impl Particle {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

/// Non-empty collection of weighted particles of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedParticleSet {
    dim: usize,
    particles: Vec<Particle>,
}

impl WeightedParticleSet {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        let first = particles.first().ok_or(Error::Empty("particle set"))?;
        let dim = first.x.len();
        for p in &particles {
            if p.x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.x.len() });
            }
            if p.log_weight.is_nan() || p.log_weight == f64::INFINITY {
                return Err(Error::arg("particle weight must be finite and non-negative"));
            }
        }
        Ok(WeightedParticleSet { dim, particles })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn into_particles(self) -> Vec<Particle> {
        self.particles
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(Particle::weight).collect()
    }

    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        normalize_log_weights(&self.log_weights())
    }

    /// `Z_hat`, the mean of the unnormalized weights.
    pub fn evidence(&self) -> f64 {
        log_evidence_estimate(&self.log_weights()).map(f64::exp).unwrap_or(0.0)
    }

    pub fn ess(&self) -> Result<f64> {
        Ok(effective_sample_size(&self.normalized_weights()?))
    }

    /// Self-normalized posterior mean.
    pub fn mean(&self) -> Result<Vec<f64>> {
        self_normalized_estimate(self, |x| x.to_vec())
    }

    /// Weighted marginal quantile `q` of coordinate `d`.
    pub fn quantile(&self, d: usize, q: f64) -> Result<f64> {
        if d >= self.dim {
            return Err(Error::arg("coordinate out of range"));
        }
        let w = self.normalized_weights()?;
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.particles[a].x[d].total_cmp(&self.particles[b].x[d]));
        let mut acc = 0.0;
        for &i in &order {
            acc += w[i];
            if acc >= q {
                return Ok(self.particles[i].x[d]);
            }
        }
        Ok(self.particles[order[order.len() - 1]].x[d])
    }

    /// Equal-tailed credible interval of coordinate `d` at `level`.
    pub fn credible_interval(&self, d: usize, level: f64) -> Result<(f64, f64)> {
        let tail = 0.5 * (1.0 - level);
        Ok((self.quantile(d, tail)?, self.quantile(d, 1.0 - tail)?))
    }

    /// Particle with the largest target value.
    pub fn map_particle(&self) -> &Particle {
        self.particles
            .iter()
            .reduce(|best, p| if p.log_target > best.log_target { p } else { best })
            .expect("particle set is never empty")
    }
}

/// `sum_n w_bar_n f(x_n)` for a vector-valued `f`.
pub fn self_normalized_estimate<F>(particles: &WeightedParticleSet, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let w = particles.normalized_weights()?;
    let mut acc: Option<Vec<f64>> = None;
    for (p, wn) in particles.particles().iter().zip(&w) {
        let v = f(&p.x);
        match acc.as_mut() {
            None => acc = Some(v.iter().map(|vi| vi * wn).collect()),
            Some(a) => {
                if a.len() != v.len() {
                    return Err(Error::DimensionMismatch { expected: a.len(), got: v.len() });
                }
                for (ai, vi) in a.iter_mut().zip(&v) {
                    // zero-weight particles may map to non-finite values
                    if *wn > 0.0 {
                        *ai += vi * wn;
                    }
                }
            }
        }
    }
    Ok(acc.expect("particle set is never empty"))
}
