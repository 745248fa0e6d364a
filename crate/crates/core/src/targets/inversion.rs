//! Bayesian inversion of a forward model and the sequential harness that
//! passes MAP estimates from one problem to the next.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radis::{run_radis, RadisConfig};
use crate::record::RunRecord;
use crate::rng::Rng;
use crate::support::SupportBox;
use crate::target::{Domain, TargetDensity};
use crate::targets::forward::{CachedForward, ForwardModel};

/// `log pi(x) = -|y - h(x)|^2 / (2 sigma^2)` on the prior box, `-inf` outside.
#[derive(Clone)]
pub struct InversionProblem {
    pub forward: Arc<CachedForward>,
    pub y: Vec<f64>,
    pub sigma: f64,
    pub prior: SupportBox,
}

impl InversionProblem {
    pub fn new(forward: Arc<CachedForward>, y: Vec<f64>, sigma: f64, prior: SupportBox) -> Result<Self> {
        if y.len() != forward.output_dim() {
            return Err(Error::DimensionMismatch { expected: forward.output_dim(), got: y.len() });
        }
        if prior.dim() != forward.input_dim() {
            return Err(Error::DimensionMismatch { expected: forward.input_dim(), got: prior.dim() });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::arg("noise std must be positive"));
        }
        Ok(InversionProblem { forward, y, sigma, prior })
    }

    /// Synthetic observation `h(x_true) + sigma v`.
    pub fn simulate(forward: Arc<CachedForward>, x_true: &[f64], sigma: f64, prior: SupportBox, rng: &mut Rng) -> Result<Self> {
        let clean = forward.eval(x_true)?;
        let y = clean.iter().map(|v| v + sigma * Distribution::<f64>::sample(&StandardNormal, rng)).collect();
        // the truth's own evaluation is not part of any solver's budget
        forward.reset_scratch();
        InversionProblem::new(forward, y, sigma, prior)
    }

    pub fn log_posterior(&self, x: &[f64]) -> f64 {
        if !self.prior.contains(x) {
            return f64::NEG_INFINITY;
        }
        match self.forward.eval(x) {
            Ok(h) => {
                let r2: f64 = self.y.iter().zip(&h).map(|(a, b)| (a - b) * (a - b)).sum();
                -r2 / (2.0 * self.sigma * self.sigma)
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }

    pub fn target(&self) -> TargetDensity {
        let me = self.clone();
        TargetDensity::new(self.prior.dim(), Domain::Bounded(self.prior.clone()), move |x: &[f64]| me.log_posterior(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialConfig {
    pub radis: RadisConfig,
    /// Most recent MAP estimates placed into `S_0` when sharing; they replace
    /// the same number of uniform initial nodes so the budget is unchanged.
    #[serde(default = "default_share_count")]
    pub share_count: usize,
}

fn default_share_count() -> usize {
    8
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    /// Highest-`pi` node of the run.
    pub map: Vec<f64>,
    pub map_log_pi: f64,
    pub record: RunRecord,
    /// Forward-model calls that missed the cache during this problem.
    pub forward_evaluations: u64,
}

/// Solve `problems` in order. All problems must share one forward model,
/// whose cache is cleared first. With `share_nodes`, each MAP is cached and
/// seeds the following problems' initial nodes.
pub fn sequential_inversion(
    problems: &[InversionProblem],
    cfg: &SequentialConfig,
    share_nodes: bool,
    rng: &mut Rng,
) -> Result<Vec<InversionResult>> {
    let first = problems.first().ok_or(Error::Empty("problem list"))?;
    if problems.iter().any(|p| !Arc::ptr_eq(&p.forward, &first.forward)) {
        return Err(Error::arg("all problems must share one forward model"));
    }
    let forward = &first.forward;
    forward.clear();
    let mut maps: Vec<Vec<f64>> = Vec::new();
    let mut results = Vec::with_capacity(problems.len());
    for (r, problem) in problems.iter().enumerate() {
        forward.reset_scratch();
        let before = forward.evaluations();
        let mut run_cfg = cfg.radis.clone();
        if share_nodes && !maps.is_empty() {
            let k = cfg.share_count.min(maps.len()).min(run_cfg.initial_nodes.count);
            run_cfg.initial_nodes.points.extend(maps[maps.len() - k..].iter().cloned());
            run_cfg.initial_nodes.count -= k;
        }
        let target = problem.target();
        let out = run_radis(&target, &run_cfg, rng)?;
        let best = out.nodes.argmax().ok_or(Error::Empty("node set"))?;
        let map = out.nodes.point(best).to_vec();
        if share_nodes {
            forward.promote(&map);
        }
        let record = RunRecord::from_particles("sequential", &run_cfg, 0, &out.particles, out.log_c_hat(), out.evaluations)?
            .with_extra("problem", r as f64)
            .with_extra("map_log_pi", out.nodes.log_value(best));
        results.push(InversionResult {
            map_log_pi: out.nodes.log_value(best),
            map: map.clone(),
            record,
            forward_evaluations: forward.evaluations() - before,
        });
        maps.push(map);
    }
    Ok(results)
}

/// Smoothly varying truths: `u_ri = 0.5 + 0.3 sin(pi r / R + phase_i)` in
/// unit-cube coordinates, mapped to `prior`.
pub fn smooth_truths(prior: &SupportBox, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let phases: Vec<f64> = (0..prior.dim()).map(|_| rand::Rng::random_range(rng, 0.0..2.0 * std::f64::consts::PI)).collect();
    (0..count)
        .map(|r| {
            phases
                .iter()
                .enumerate()
                .map(|(i, ph)| {
                    let u = 0.5 + 0.3 * (std::f64::consts::PI * r as f64 / count as f64 + ph).sin();
                    prior.lower()[i] + u * (prior.upper()[i] - prior.lower()[i])
                })
                .collect()
        })
        .collect()
}

/// Mean absolute error in unit-cube coordinates.
pub fn normalized_mae(prior: &SupportBox, estimate: &[f64], truth: &[f64]) -> f64 {
    let a = prior.normalize(estimate);
    let b = prior.normalize(truth);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}
