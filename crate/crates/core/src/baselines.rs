//! Reference samplers: standard IS, PMC, DM-PMC, one-chain LAIS and AMIS.
//!
//! Every sampler spends exactly its budget `E` of target evaluations.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::multinomial_resample;
use crate::proposal::{Density, LocationScale, Proposal, ProposalSpec};
use crate::rng::Rng;
use crate::support::SupportBox;
use crate::target::TargetDensity;
use crate::weights::{log_add_exp, log_sum_exp, Particle, WeightedParticleSet};

/// `E` draws from `proposal`, weighted `pi / q`.
pub fn standard_is(
    target: &TargetDensity,
    proposal: &dyn Proposal,
    budget: usize,
    rng: &mut Rng,
) -> Result<WeightedParticleSet> {
    if budget == 0 {
        return Err(Error::config("budget E must be at least 1"));
    }
    check_dim(target, proposal.dim())?;
    let xs: Vec<Vec<f64>> = (0..budget).map(|_| proposal.sample(rng)).collect();
    let particles = xs
        .into_par_iter()
        .enumerate()
        .map(|(i, x)| {
            let lq = proposal.log_density(&x);
            if lq == f64::NEG_INFINITY {
                return Err(Error::SupportViolation);
            }
            let lp = target.log_pi(&x);
            Ok(Particle { log_weight: lp - lq, log_target: lp, x, iteration: 1, index: i })
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedParticleSet::new(particles)
}

fn check_dim(target: &TargetDensity, got: usize) -> Result<()> {
    if got != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), got });
    }
    Ok(())
}

fn check_box(target: &TargetDensity, b: &SupportBox) -> Result<()> {
    check_dim(target, b.dim())
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi.is_finite() {
        Ok(())
    } else {
        Err(Error::config("proposal scale xi must be positive"))
    }
}

fn isotropic_draw(mean: &[f64], xi: f64, rng: &mut Rng) -> Vec<f64> {
    mean.iter().map(|m| m + xi * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn log_gauss_iso(x: &[f64], mean: &[f64], xi: f64) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * r2 / (xi * xi) - d * xi.ln() - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
}

/// Population Monte Carlo with `proposals` isotropic Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmcConfig {
    pub proposals: usize,
    pub xi: f64,
    pub budget: usize,
    pub init_box: SupportBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PmcWeighting {
    Standard,
    DeterministicMixture,
}

/// Weighted draws and the proposal locations used at every iteration.
#[derive(Debug, Clone)]
pub struct PmcOutput {
    pub particles: WeightedParticleSet,
    pub locations: Vec<Vec<Vec<f64>>>,
}

pub fn pmc(target: &TargetDensity, cfg: &PmcConfig, rng: &mut Rng) -> Result<WeightedParticleSet> {
    Ok(run_pmc(target, cfg, PmcWeighting::Standard, rng)?.particles)
}

/// PMC where each draw is weighted against the whole population mixture.
pub fn dm_pmc(target: &TargetDensity, cfg: &PmcConfig, rng: &mut Rng) -> Result<WeightedParticleSet> {
    Ok(run_pmc(target, cfg, PmcWeighting::DeterministicMixture, rng)?.particles)
}

pub fn pmc_trace(target: &TargetDensity, cfg: &PmcConfig, mixture: bool, rng: &mut Rng) -> Result<PmcOutput> {
    let w = if mixture { PmcWeighting::DeterministicMixture } else { PmcWeighting::Standard };
    run_pmc(target, cfg, w, rng)
}

fn run_pmc(target: &TargetDensity, cfg: &PmcConfig, weighting: PmcWeighting, rng: &mut Rng) -> Result<PmcOutput> {
    let n = cfg.proposals;
    if n == 0 || cfg.budget == 0 || cfg.budget % n != 0 {
        return Err(Error::config(format!("proposal count {n} must divide the budget {}", cfg.budget)));
    }
    check_xi(cfg.xi)?;
    check_box(target, &cfg.init_box)?;
    let t_max = cfg.budget / n;
    let mut means: Vec<Vec<f64>> = (0..n).map(|_| cfg.init_box.sample_uniform(rng)).collect();
    let mut locations = Vec::with_capacity(t_max);
    let mut particles = Vec::with_capacity(cfg.budget);
    for t in 1..=t_max {
        let xs: Vec<Vec<f64>> = means.iter().map(|m| isotropic_draw(m, cfg.xi, rng)).collect();
        let log_pi: Vec<f64> = xs.par_iter().map(|x| target.log_pi(x)).collect();
        let log_w: Vec<f64> = xs
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let lq = match weighting {
                    PmcWeighting::Standard => log_gauss_iso(x, &means[i], cfg.xi),
                    PmcWeighting::DeterministicMixture => {
                        let comps: Vec<f64> = means.iter().map(|m| log_gauss_iso(x, m, cfg.xi)).collect();
                        log_sum_exp(&comps).expect("non-empty") - (n as f64).ln()
                    }
                };
                log_pi[i] - lq
            })
            .collect();
        let idx = multinomial_resample(&log_w, n, rng).map_err(|e| match e {
            Error::DegenerateWeights => Error::DegenerateIterationWeights { iteration: t },
            other => other,
        })?;
        locations.push(std::mem::take(&mut means));
        means = idx.iter().map(|&i| xs[i].clone()).collect();
        for (i, ((x, lp), lw)) in xs.into_iter().zip(log_pi).zip(log_w).enumerate() {
            particles.push(Particle { x, log_weight: lw, log_target: lp, iteration: t, index: i });
        }
    }
    Ok(PmcOutput { particles: WeightedParticleSet::new(particles)?, locations })
}

/// States of a random-walk Metropolis chain and their target values.
#[derive(Debug, Clone)]
pub struct Chain {
    pub states: Vec<Vec<f64>>,
    pub log_pi: Vec<f64>,
    pub accepted: usize,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.states.len() < 2 {
            return 0.0;
        }
        self.accepted as f64 / (self.states.len() - 1) as f64
    }
}

/// Gaussian random-walk Metropolis with step `xi`. Returns `length` states
/// (including `start`) at a cost of exactly `length` target evaluations.
pub fn rw_metropolis(target: &TargetDensity, start: Vec<f64>, length: usize, xi: f64, rng: &mut Rng) -> Result<Chain> {
    if length == 0 {
        return Err(Error::config("chain length must be at least 1"));
    }
    check_xi(xi)?;
    check_dim(target, start.len())?;
    let mut states = Vec::with_capacity(length);
    let mut log_pi = Vec::with_capacity(length);
    let mut cur_lp = target.log_pi(&start);
    let mut cur = start;
    let mut accepted = 0;
    states.push(cur.clone());
    log_pi.push(cur_lp);
    for _ in 1..length {
        let prop = isotropic_draw(&cur, xi, rng);
        let lp = target.log_pi(&prop);
        let u: f64 = rng.random();
        if lp > f64::NEG_INFINITY && (cur_lp == f64::NEG_INFINITY || u.ln() < lp - cur_lp) {
            cur = prop;
            cur_lp = lp;
            accepted += 1;
        }
        states.push(cur.clone());
        log_pi.push(cur_lp);
    }
    if length > 1 && accepted == 0 {
        log::warn!("random-walk Metropolis accepted no proposal in {} steps", length - 1);
    }
    Ok(Chain { states, log_pi, accepted })
}

/// One-chain LAIS: the chain states locate an equal Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaisConfig {
    pub chain_length: usize,
    pub xi: f64,
    pub budget: usize,
    pub init_box: SupportBox,
}

/// Chain start drawn uniformly in `init_box`.
pub fn lais_chain(target: &TargetDensity, cfg: &LaisConfig, rng: &mut Rng) -> Result<Chain> {
    check_box(target, &cfg.init_box)?;
    let start = cfg.init_box.sample_uniform(rng);
    rw_metropolis(target, start, cfg.chain_length, cfg.xi, rng)
}

pub fn oc_lais(target: &TargetDensity, cfg: &LaisConfig, rng: &mut Rng) -> Result<WeightedParticleSet> {
    if cfg.chain_length == 0 || cfg.chain_length >= cfg.budget {
        return Err(Error::config("chain length must satisfy 1 <= N_LAIS < E"));
    }
    let chain = lais_chain(target, cfg, rng)?;
    let n = chain.states.len();
    let log_n = (n as f64).ln();
    let draws: Vec<Vec<f64>> = (0..cfg.budget - n)
        .map(|_| {
            let c = rng.random_range(0..n);
            isotropic_draw(&chain.states[c], cfg.xi, rng)
        })
        .collect();
    let particles = draws
        .into_par_iter()
        .enumerate()
        .map(|(i, x)| {
            let comps: Vec<f64> = chain.states.iter().map(|m| log_gauss_iso(&x, m, cfg.xi)).collect();
            let lq = log_sum_exp(&comps).expect("non-empty") - log_n;
            let lp = target.log_pi(&x);
            Particle { log_weight: lp - lq, log_target: lp, x, iteration: 1, index: i }
        })
        .collect();
    WeightedParticleSet::new(particles)
}

/// Adaptive multiple IS with one Gaussian proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmisConfig {
    /// `M`, draws per iteration.
    pub per_iteration: usize,
    pub xi: f64,
    pub budget: usize,
    pub init_box: SupportBox,
    /// Match the weighted covariance as well as the mean; off keeps `xi^2 I`.
    #[serde(default = "default_adapt_covariance")]
    pub adapt_covariance: bool,
}

fn default_adapt_covariance() -> bool {
    true
}

#[derive(Debug, Clone)]
pub struct AmisOutput {
    pub particles: WeightedParticleSet,
    /// Proposal mean used at each iteration.
    pub means: Vec<Vec<f64>>,
}

pub fn amis(target: &TargetDensity, cfg: &AmisConfig, rng: &mut Rng) -> Result<WeightedParticleSet> {
    Ok(amis_trace(target, cfg, rng)?.particles)
}

pub fn amis_trace(target: &TargetDensity, cfg: &AmisConfig, rng: &mut Rng) -> Result<AmisOutput> {
    let m = cfg.per_iteration;
    if m == 0 || cfg.budget == 0 || cfg.budget % m != 0 {
        return Err(Error::config(format!("M = {m} must divide the budget {}", cfg.budget)));
    }
    check_xi(cfg.xi)?;
    check_box(target, &cfg.init_box)?;
    let d = target.dim();
    let t_max = cfg.budget / m;
    let iso = || DMatrix::from_diagonal_element(d, d, cfg.xi * cfg.xi);
    let mut q = LocationScale::new(cfg.init_box.sample_uniform(rng), iso())?;
    let mut proposals: Vec<Density> = Vec::with_capacity(t_max);
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(cfg.budget);
    let mut log_pi: Vec<f64> = Vec::with_capacity(cfg.budget);
    // log sum_tau q_tau(x) over the proposals seen so far
    let mut log_mix: Vec<f64> = Vec::with_capacity(cfg.budget);
    let mut means = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        means.push(q.mean().to_vec());
        let dens = Density::Gaussian(q.clone());
        let fresh: Vec<Vec<f64>> = (0..m).map(|_| dens.sample(rng)).collect();
        let fresh_lp: Vec<f64> = fresh.par_iter().map(|x| target.log_pi(x)).collect();
        log_mix.par_iter_mut().zip(xs.par_iter()).for_each(|(lm, x)| *lm = log_add_exp(*lm, dens.log_density(x)));
        let fresh_mix: Vec<f64> = fresh
            .par_iter()
            .map(|x| {
                let mut acc = dens.log_density(x);
                for p in &proposals {
                    acc = log_add_exp(acc, p.log_density(x));
                }
                acc
            })
            .collect();
        proposals.push(dens);
        xs.extend(fresh);
        log_pi.extend(fresh_lp);
        log_mix.extend(fresh_mix);
        if t == t_max {
            break;
        }
        let log_t = (t as f64).ln();
        let log_w: Vec<f64> = log_pi.iter().zip(&log_mix).map(|(lp, lm)| lp - (lm - log_t)).collect();
        let lse = log_sum_exp(&log_w)?;
        if lse == f64::NEG_INFINITY || !lse.is_finite() {
            // nothing to learn from; keep the current proposal
            continue;
        }
        let w: Vec<f64> = log_w.iter().map(|v| (v - lse).exp()).collect();
        let mut mean = vec![0.0; d];
        for (x, wi) in xs.iter().zip(&w) {
            for (a, v) in mean.iter_mut().zip(x) {
                *a += wi * v;
            }
        }
        let cov = if cfg.adapt_covariance {
            let mut c = DMatrix::<f64>::zeros(d, d);
            for (x, wi) in xs.iter().zip(&w) {
                for a in 0..d {
                    for b in 0..d {
                        c[(a, b)] += wi * (x[a] - mean[a]) * (x[b] - mean[b]);
                    }
                }
            }
            c
        } else {
            iso()
        };
        q = match LocationScale::new(mean.clone(), cov) {
            Ok(ls) => ls,
            Err(_) => LocationScale::new(mean, iso())?,
        };
    }
    let log_t = (t_max as f64).ln();
    let particles = xs
        .into_iter()
        .zip(log_pi)
        .zip(log_mix)
        .enumerate()
        .map(|(k, ((x, lp), lm))| Particle {
            x,
            log_weight: lp - (lm - log_t),
            log_target: lp,
            iteration: k / m + 1,
            index: k % m,
        })
        .collect();
    Ok(AmisOutput { particles: WeightedParticleSet::new(particles)?, means })
}

/// Serializable choice of baseline sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaselineConfig {
    StandardIs { proposal: ProposalSpec, budget: usize },
    Pmc(PmcConfig),
    DmPmc(PmcConfig),
    OcLais(LaisConfig),
    Amis(AmisConfig),
}

impl BaselineConfig {
    pub fn budget(&self) -> usize {
        match self {
            BaselineConfig::StandardIs { budget, .. } => *budget,
            BaselineConfig::Pmc(c) | BaselineConfig::DmPmc(c) => c.budget,
            BaselineConfig::OcLais(c) => c.budget,
            BaselineConfig::Amis(c) => c.budget,
        }
    }

    pub fn run(&self, target: &TargetDensity, rng: &mut Rng) -> Result<WeightedParticleSet> {
        match self {
            BaselineConfig::StandardIs { proposal, budget } => standard_is(target, &proposal.build()?, *budget, rng),
            BaselineConfig::Pmc(c) => pmc(target, c, rng),
            BaselineConfig::DmPmc(c) => dm_pmc(target, c, rng),
            BaselineConfig::OcLais(c) => oc_lais(target, c, rng),
            BaselineConfig::Amis(c) => amis(target, c, rng),
        }
    }
}
