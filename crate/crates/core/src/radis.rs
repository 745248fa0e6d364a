//! The adaptive loop: emulator refresh, inner SIR, node growth and the final
//! temporal deterministic-mixture weighting.

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::{Emulator, EmulatorSpec};
use crate::error::{Error, Result};
use crate::gp::{farthest_point_thinning, fit_gp_with, tune_lengthscale_with, FitOptions, GpKernel, GpSpec};
use crate::inner::{
    estimate_log_normalizer, multinomial_resample, regularized_resample, silverman_bandwidth, sir_step, InnerBatch,
};
use crate::nn::{build_nn, expand_support};
use crate::nodes::NodeSet;
use crate::proposal::{Density, Proposal, ProposalSpec};
use crate::rng::Rng;
use crate::support::SupportBox;
use crate::target::{Domain, TargetDensity};
use crate::weights::{log_add_exp, log_sum_exp, Particle, WeightedParticleSet};

/// One emulator layer and the size of the pool it weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    #[serde(flatten)]
    pub emulator: EmulatorSpec,
    pub batch_size: usize,
}

/// Mixture weight `alpha_t` of the parametric component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlphaSchedule {
    Fixed { value: f64 },
    /// `max(floor, initial (1 - t / T))`.
    Decay { initial: f64, floor: f64 },
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule::Decay { initial: 0.5, floor: 0.05 }
    }
}

impl AlphaSchedule {
    pub fn at(&self, t: usize, iterations: usize) -> f64 {
        match *self {
            AlphaSchedule::Fixed { value } => value,
            AlphaSchedule::Decay { initial, floor } => floor.max(initial * (1.0 - t as f64 / iterations as f64)),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AlphaSchedule::Fixed { value } => (0.0..=1.0).contains(&value),
            AlphaSchedule::Decay { initial, floor } => {
                (0.0..=1.0).contains(&initial) && (0.0..=1.0).contains(&floor)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("alpha values must lie in [0, 1]"))
        }
    }
}

/// Auxiliary proposal of the first inner layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AuxSpec {
    /// Uniform on the support box, except for a GP first layer on an
    /// unbounded domain, which gets a moment-matched Student-t.
    #[default]
    Auto,
    /// Uniform on the current support box.
    Support,
    /// Student-t matched to the mean and covariance of the current nodes.
    StudentT {
        #[serde(default = "default_dof")]
        dof: f64,
    },
    Fixed { proposal: ProposalSpec },
}

fn default_dof() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Resampling {
    #[default]
    Plain,
    /// Gaussian jitter with a Silverman bandwidth after resampling.
    Regularized,
}

/// Placement of `S_0`: explicit points, optional box vertices, then `count`
/// uniform draws in `region` (the domain box when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialNodes {
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub region: Option<SupportBox>,
    #[serde(default)]
    pub vertices: bool,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
}

impl InitialNodes {
    pub fn uniform(count: usize) -> Self {
        InitialNodes { count, ..Default::default() }
    }

    pub fn in_region(count: usize, region: SupportBox) -> Self {
        InitialNodes { count, region: Some(region), ..Default::default() }
    }

    fn size(&self, dim: usize) -> usize {
        self.points.len() + self.count + if self.vertices { 1 << dim } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadisConfig {
    /// `T`.
    pub iterations: usize,
    /// `N`, true-target evaluations per iteration.
    pub samples_per_iteration: usize,
    /// One entry per emulator layer; batch sizes must strictly decrease and
    /// the last must be at least `N`.
    pub layers: Vec<LayerConfig>,
    #[serde(default)]
    pub aux: AuxSpec,
    /// Parametric component `q_par`; `alpha` is ignored without it.
    #[serde(default)]
    pub parametric: Option<ProposalSpec>,
    #[serde(default)]
    pub alpha: AlphaSchedule,
    #[serde(default)]
    pub initial_nodes: InitialNodes,
    #[serde(default)]
    pub resampling: Resampling,
    /// Defaults to `1e-9` times the diagonal of the domain (or initial region).
    #[serde(default)]
    pub dedup_tol: Option<f64>,
}

impl RadisConfig {
    /// Single-layer nearest-neighbour configuration with uniform initial nodes.
    pub fn nn(iterations: usize, samples_per_iteration: usize, batch_size: usize, initial: usize) -> Self {
        RadisConfig {
            iterations,
            samples_per_iteration,
            layers: vec![LayerConfig { emulator: EmulatorSpec::nn(1), batch_size }],
            aux: AuxSpec::Auto,
            parametric: None,
            alpha: AlphaSchedule::default(),
            initial_nodes: InitialNodes::uniform(initial),
            resampling: Resampling::Plain,
            dedup_tol: None,
        }
    }

    pub fn with_parametric(mut self, spec: ProposalSpec, alpha: AlphaSchedule) -> Self {
        self.parametric = Some(spec);
        self.alpha = alpha;
        self
    }

    /// Number of nodes placed (and evaluated) by the configuration itself.
    pub fn initial_count(&self, dim: usize) -> usize {
        self.initial_nodes.size(dim)
    }

    /// Total budget `|S_0| + N T` for a target of dimension `dim`.
    pub fn budget(&self, dim: usize) -> usize {
        self.initial_count(dim) + self.samples_per_iteration * self.iterations
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations T must be at least 1"));
        }
        if self.samples_per_iteration == 0 {
            return Err(Error::config("samples per iteration N must be at least 1"));
        }
        if self.layers.is_empty() {
            return Err(Error::config("at least one emulator layer is required"));
        }
        for w in self.layers.windows(2) {
            if w[1].batch_size >= w[0].batch_size {
                return Err(Error::config("layer batch sizes must strictly decrease"));
            }
        }
        let last = self.layers.last().expect("non-empty").batch_size;
        if last < self.samples_per_iteration {
            return Err(Error::config(format!(
                "inner batch size {last} is smaller than N = {}",
                self.samples_per_iteration
            )));
        }
        for layer in &self.layers {
            match &layer.emulator {
                EmulatorSpec::Nn { k } if *k == 0 => return Err(Error::config("k must be at least 1")),
                EmulatorSpec::Gp(gp) if gp.noise < 0.0 || gp.node_cap == 0 || gp.tune_every == 0 => {
                    return Err(Error::config("GP noise must be >= 0, node cap and tuning period >= 1"))
                }
                _ => {}
            }
        }
        self.alpha.validate()?;
        if let Some(r) = &self.initial_nodes.region {
            SupportBox::new(r.lower().to_vec(), r.upper().to_vec())?;
        }
        Ok(())
    }
}

/// One component `alpha q_par + (1 - alpha) pi_hat / c_hat` of the temporal mixture.
#[derive(Clone)]
pub struct MixtureTerm {
    pub alpha: f64,
    pub emulator: Arc<dyn Emulator>,
    pub log_c_hat: f64,
}

impl std::fmt::Debug for MixtureTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MixtureTerm").field("alpha", &self.alpha).field("log_c_hat", &self.log_c_hat).finish()
    }
}

impl MixtureTerm {
    /// `log phi_t(x)` given `log q_par(x)` (ignored when `alpha = 0`).
    pub fn log_density_with(&self, x: &[f64], log_q_par: f64) -> f64 {
        let em = if self.alpha < 1.0 {
            (1.0 - self.alpha).ln() + self.emulator.log_eval(x) - self.log_c_hat
        } else {
            f64::NEG_INFINITY
        };
        if self.alpha > 0.0 {
            log_add_exp(self.alpha.ln() + log_q_par, em)
        } else {
            em
        }
    }
}

/// Snapshots of every proposal used, in iteration order.
#[derive(Debug, Clone, Default)]
pub struct EmulatorTrace {
    pub terms: Vec<MixtureTerm>,
}

impl EmulatorTrace {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `log phi_t(x)` for the 1-based iteration `t`.
    pub fn log_density(&self, t: usize, x: &[f64], parametric: Option<&dyn Proposal>) -> f64 {
        let lq = parametric.map_or(f64::NEG_INFINITY, |q| q.log_density(x));
        self.terms[t - 1].log_density_with(x, lq)
    }
}

/// `log w = log pi(x) - log((1/T) sum_t phi_t(x))` for every particle.
pub fn outer_log_weights(
    points: &[Vec<f64>],
    log_pi: &[f64],
    terms: &[MixtureTerm],
    parametric: Option<&dyn Proposal>,
) -> Result<Vec<f64>> {
    if points.len() != log_pi.len() {
        return Err(Error::arg("points and target values differ in length"));
    }
    if terms.is_empty() {
        return Err(Error::Empty("emulator trace"));
    }
    if terms.iter().any(|t| t.alpha > 0.0) && parametric.is_none() {
        return Err(Error::arg("mixture terms with alpha > 0 need a parametric density"));
    }
    let log_t = (terms.len() as f64).ln();
    points
        .par_iter()
        .zip(log_pi.par_iter())
        .enumerate()
        .map(|(i, (x, &lp))| {
            let lq = parametric.map_or(f64::NEG_INFINITY, |q| q.log_density(x));
            let comps: Vec<f64> = terms.iter().map(|t| t.log_density_with(x, lq)).collect();
            let denom = log_sum_exp(&comps)? - log_t;
            if denom == f64::NEG_INFINITY {
                return Err(Error::ZeroDenominator { index: i });
            }
            Ok(lp - denom)
        })
        .collect()
}

/// Linear-domain version of [`outer_log_weights`].
pub fn outer_weights(
    points: &[Vec<f64>],
    pi_values: &[f64],
    terms: &[MixtureTerm],
    parametric: Option<&dyn Proposal>,
) -> Result<Vec<f64>> {
    let log_pi: Vec<f64> = pi_values.iter().map(|v| v.ln()).collect();
    Ok(outer_log_weights(points, &log_pi, terms, parametric)?.into_iter().map(f64::exp).collect())
}

/// `phi(x) = alpha q_par(x) + (1 - alpha) pi_hat(x) / c_hat`.
#[derive(Clone)]
pub struct MixtureDensity {
    pub term: MixtureTerm,
    pub parametric: Option<Arc<Density>>,
}

pub fn mixture_proposal(
    emulator: Arc<dyn Emulator>,
    c_hat: f64,
    parametric: Option<Arc<Density>>,
    alpha: f64,
) -> Result<MixtureDensity> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::arg("alpha must lie in [0, 1]"));
    }
    if !(c_hat > 0.0 && c_hat.is_finite()) {
        return Err(Error::arg("c_hat must be positive"));
    }
    if alpha > 0.0 && parametric.is_none() {
        return Err(Error::arg("alpha > 0 needs a parametric component"));
    }
    Ok(MixtureDensity { term: MixtureTerm { alpha, emulator, log_c_hat: c_hat.ln() }, parametric })
}

impl MixtureDensity {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let lq = self.parametric.as_ref().map_or(f64::NEG_INFINITY, |q| q.log_density(x));
        self.term.log_density_with(x, lq)
    }

    /// `n` draws: each from `q_par` with probability `alpha`, otherwise from
    /// one shared SIR pool of `pool` draws of `aux`.
    pub fn sample(&self, n: usize, aux: &dyn Proposal, pool: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        let flags = branch_flags(n, self.term.alpha, rng);
        let n_sir = flags.iter().filter(|f| !**f).count();
        let mut sir = if n_sir > 0 {
            sir_step(&self.term.emulator, aux, pool, n_sir, rng)?.resampled_points().into_iter()
        } else {
            Vec::new().into_iter()
        };
        Ok(flags
            .iter()
            .map(|&par| {
                if par {
                    self.parametric.as_ref().expect("validated").sample(rng)
                } else {
                    sir.next().expect("one SIR draw per flag")
                }
            })
            .collect())
    }
}

/// `true` marks a draw from the parametric branch.
fn branch_flags(n: usize, alpha: f64, rng: &mut Rng) -> Vec<bool> {
    if alpha <= 0.0 {
        return vec![false; n];
    }
    (0..n).map(|_| rng.random::<f64>() < alpha).collect()
}

/// Equal-weight mixture of isotropic Gaussians at externally supplied locations.
pub fn adaptive_parametric_mixture(means: &[Vec<f64>], std: f64) -> Result<Density> {
    if means.is_empty() {
        return Err(Error::Empty("mixture locations"));
    }
    let comps = means.iter().map(|m| Density::gaussian_isotropic(m.clone(), std)).collect::<Result<Vec<_>>>()?;
    Density::equal_mixture(comps)
}

/// Everything a run produces.
#[derive(Clone)]
pub struct RadisOutput {
    /// All `N T` outer-weighted draws.
    pub particles: WeightedParticleSet,
    /// Emulator built from the final node set with the last layer's settings.
    pub final_emulator: Arc<dyn Emulator>,
    pub nodes: NodeSet,
    pub trace: EmulatorTrace,
    pub parametric: Option<Arc<Density>>,
    /// Per iteration, `log c_hat` of every layer.
    pub layer_log_c_hat: Vec<Vec<f64>>,
    pub evidence: f64,
    /// Target evaluations made by this run.
    pub evaluations: u64,
    /// Node count after each iteration (`J_t`), starting with `|S_0|`.
    pub node_counts: Vec<usize>,
}

impl RadisOutput {
    /// `log c_hat_t` of the final layer, one per iteration.
    pub fn log_c_hat(&self) -> Vec<f64> {
        self.trace.terms.iter().map(|t| t.log_c_hat).collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.trace.terms.iter().map(|t| t.alpha).collect()
    }

    /// `log phi_t(x)` for the 1-based iteration `t`.
    pub fn log_proposal(&self, t: usize, x: &[f64]) -> f64 {
        self.trace.log_density(t, x, self.parametric.as_deref().map(|d| d as &dyn Proposal))
    }
}

impl std::fmt::Debug for RadisOutput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadisOutput")
            .field("particles", &self.particles.len())
            .field("nodes", &self.nodes.len())
            .field("evidence", &self.evidence)
            .field("evaluations", &self.evaluations)
            .finish()
    }
}

/// Builder for a run with optional pre-evaluated nodes and a runtime `q_par`.
pub struct Radis<'a> {
    target: &'a TargetDensity,
    cfg: &'a RadisConfig,
    seeded: Option<(Vec<Vec<f64>>, Vec<f64>)>,
    parametric: Option<Density>,
}

#[derive(Default, Clone)]
struct GpState {
    lengthscale: Option<f64>,
}

impl<'a> Radis<'a> {
    pub fn new(target: &'a TargetDensity, cfg: &'a RadisConfig) -> Self {
        Radis { target, cfg, seeded: None, parametric: None }
    }

    /// Nodes already evaluated elsewhere; they join `S_0` without touching the ledger.
    pub fn with_initial_nodes(mut self, points: Vec<Vec<f64>>, log_values: Vec<f64>) -> Self {
        self.seeded = Some((points, log_values));
        self
    }

    /// Overrides `cfg.parametric`.
    pub fn with_parametric(mut self, q: Density) -> Self {
        self.parametric = Some(q);
        self
    }

    pub fn run(self, rng: &mut Rng) -> Result<RadisOutput> {
        let cfg = self.cfg;
        cfg.validate()?;
        let target = self.target;
        let dim = target.dim();
        let start_evals = target.evaluations();
        let domain_box = target.domain().as_box().cloned();
        let parametric: Option<Arc<Density>> = match (self.parametric, &cfg.parametric) {
            (Some(q), _) => Some(Arc::new(q)),
            (None, Some(spec)) => Some(Arc::new(spec.build()?)),
            (None, None) => None,
        };
        if let Some(q) = &parametric {
            if q.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: q.dim() });
            }
        }
        let unbounded = matches!(target.domain(), Domain::Unbounded);
        if unbounded && parametric.is_none() && cfg.layers.iter().any(|l| l.emulator.is_nn()) {
            return Err(Error::config("an NN emulator on an unbounded domain needs a parametric component"));
        }
        let region = cfg.initial_nodes.region.clone().or_else(|| domain_box.clone());

        // S_0
        let mut init_points: Vec<Vec<f64>> = cfg.initial_nodes.points.clone();
        if cfg.initial_nodes.vertices || cfg.initial_nodes.count > 0 {
            let r = region
                .as_ref()
                .ok_or_else(|| Error::config("initial nodes need a region on an unbounded domain"))?;
            if r.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.dim() });
            }
            if cfg.initial_nodes.vertices {
                init_points.extend((0..1usize << dim).map(|k| r.vertex(k)));
            }
            init_points.extend((0..cfg.initial_nodes.count).map(|_| r.sample_uniform(rng)));
        }
        if let Some(p) = init_points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        let init_logs: Vec<f64> = init_points.par_iter().map(|x| target.log_pi(x)).collect();
        let tol = cfg.dedup_tol.unwrap_or_else(|| {
            let diag = domain_box.as_ref().or(region.as_ref()).map_or(1.0, SupportBox::diagonal);
            1e-9 * diag
        });
        let mut nodes = NodeSet::new(dim);
        if let Some((pts, logs)) = &self.seeded {
            nodes.add_nodes(pts, logs, tol)?;
        }
        nodes.add_nodes(&init_points, &init_logs, tol)?;
        if nodes.is_empty() {
            return Err(Error::config("the initial node set is empty"));
        }

        let mut support = match &domain_box {
            Some(b) => b.clone(),
            None => padded(nodes.bounding_box()?),
        };
        let n = cfg.samples_per_iteration;
        let t_max = cfg.iterations;
        let mut gp_states = vec![GpState::default(); cfg.layers.len()];
        let mut trace = EmulatorTrace::default();
        let mut layer_log_c_hat = Vec::with_capacity(t_max);
        let mut node_counts = vec![nodes.len()];
        let mut all_points: Vec<Vec<f64>> = Vec::with_capacity(n * t_max);
        let mut all_logs: Vec<f64> = Vec::with_capacity(n * t_max);
        let mut tags: Vec<(usize, usize)> = Vec::with_capacity(n * t_max);

        for t in 1..=t_max {
            if unbounded {
                support = padded(expand_support(&support, &nodes)?);
            }
            let alpha = if parametric.is_some() { cfg.alpha.at(t, t_max) } else { 0.0 };
            let emulators = cfg
                .layers
                .iter()
                .zip(gp_states.iter_mut())
                .map(|(layer, state)| build_emulator(&layer.emulator, &nodes, &support, state, t))
                .collect::<Result<Vec<_>>>()?;
            let aux = build_aux(&cfg.aux, &cfg.layers[0].emulator, unbounded, &support, &nodes)?;

            let flags = branch_flags(n, alpha, rng);
            let n_sir = flags.iter().filter(|f| !**f).count();
            let (sir_points, log_c) = run_layers(cfg, &emulators, &aux, n_sir, domain_box.as_ref(), rng)
                .map_err(|e| match e {
                    Error::DegenerateWeights => Error::DegenerateInnerWeights { iteration: t },
                    other => other,
                })?;
            let mut sir_iter = sir_points.into_iter();
            let draws: Vec<Vec<f64>> = flags
                .iter()
                .map(|&par| {
                    if par {
                        parametric.as_ref().expect("alpha > 0 only with q_par").sample(rng)
                    } else {
                        sir_iter.next().expect("one SIR draw per flag")
                    }
                })
                .collect();
            let logs: Vec<f64> = draws.par_iter().map(|x| target.log_pi(x)).collect();
            nodes.add_nodes(&draws, &logs, tol)?;
            node_counts.push(nodes.len());
            trace.terms.push(MixtureTerm {
                alpha,
                emulator: emulators.last().expect("non-empty").clone(),
                log_c_hat: *log_c.last().expect("non-empty"),
            });
            layer_log_c_hat.push(log_c);
            tags.extend((0..n).map(|i| (t, i)));
            all_points.extend(draws);
            all_logs.extend(logs);
        }

        let q_ref = parametric.as_deref().map(|d| d as &dyn Proposal);
        let log_w = outer_log_weights(&all_points, &all_logs, &trace.terms, q_ref)?;
        let particles: Vec<Particle> = all_points
            .into_iter()
            .zip(all_logs)
            .zip(log_w)
            .zip(tags)
            .map(|(((x, lp), lw), (t, i))| Particle { x, log_weight: lw, log_target: lp, iteration: t, index: i })
            .collect();
        let particles = WeightedParticleSet::new(particles)?;
        if unbounded {
            support = padded(expand_support(&support, &nodes)?);
        }
        let last = cfg.layers.len() - 1;
        let final_emulator =
            build_emulator(&cfg.layers[last].emulator, &nodes, &support, &mut gp_states[last], t_max + 1)?;
        Ok(RadisOutput {
            evidence: particles.evidence(),
            particles,
            final_emulator,
            nodes,
            trace,
            parametric,
            layer_log_c_hat,
            evaluations: target.evaluations() - start_evals,
            node_counts,
        })
    }
}

/// Widen zero-width sides of an adaptive box so uniform densities stay finite.
fn padded(b: SupportBox) -> SupportBox {
    if b.widths().iter().all(|w| *w > 0.0) {
        return b;
    }
    let lower = b.lower().iter().zip(b.upper()).map(|(l, u)| if u > l { *l } else { l - 0.5 * l.abs().max(1.0) }).collect();
    let upper = b.lower().iter().zip(b.upper()).map(|(l, u)| if u > l { *u } else { u + 0.5 * u.abs().max(1.0) }).collect();
    SupportBox::new(lower, upper).expect("padding keeps bounds ordered")
}

fn build_emulator(
    spec: &EmulatorSpec,
    nodes: &NodeSet,
    support: &SupportBox,
    state: &mut GpState,
    t: usize,
) -> Result<Arc<dyn Emulator>> {
    match spec {
        EmulatorSpec::Nn { k } => Ok(Arc::new(build_nn(nodes.clone(), (*k).min(nodes.len()), support.clone())?)),
        EmulatorSpec::Gp(gp) => Ok(Arc::new(build_gp(gp, nodes, support, state, t)?)),
    }
}

fn build_gp(
    gp: &GpSpec,
    nodes: &NodeSet,
    support: &SupportBox,
    state: &mut GpState,
    t: usize,
) -> Result<crate::gp::GpEmulator> {
    let subset = if nodes.len() > gp.node_cap { nodes.subset(&farthest_point_thinning(nodes, gp.node_cap)) } else { nodes.clone() };
    let opts = FitOptions { constant_mean: gp.constant_mean, floor_gap: Some(gp.floor_gap) };
    let eps = match gp.lengthscale {
        Some(e) => e,
        None => {
            let due = state.lengthscale.is_none() || (t - 1) % gp.tune_every == 0;
            if due {
                let grid = gp.grid_for(support.diagonal());
                let e = if subset.len() >= 2 {
                    tune_lengthscale_with(&subset, gp.noise, &grid, opts)?
                } else {
                    grid[grid.len() / 2]
                };
                state.lengthscale = Some(e);
            }
            state.lengthscale.expect("set above")
        }
    };
    Ok(fit_gp_with(subset, GpKernel::new(eps, gp.noise)?, opts)?.without_factor().truncated(support.clone()))
}

fn build_aux(
    spec: &AuxSpec,
    first: &EmulatorSpec,
    unbounded: bool,
    support: &SupportBox,
    nodes: &NodeSet,
) -> Result<Density> {
    match spec {
        AuxSpec::Auto if unbounded && !first.is_nn() => node_student_t(nodes, default_dof()),
        AuxSpec::Auto | AuxSpec::Support => Ok(Density::uniform(support.clone())),
        AuxSpec::StudentT { dof } => node_student_t(nodes, *dof),
        AuxSpec::Fixed { proposal } => proposal.build(),
    }
}

/// Student-t whose covariance equals the node covariance (plus a small ridge).
fn node_student_t(nodes: &NodeSet, dof: f64) -> Result<Density> {
    let d = nodes.dim();
    let j = nodes.len() as f64;
    let mut mean = vec![0.0; d];
    for p in nodes.points() {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / j;
        }
    }
    let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
    for p in nodes.points() {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (p[a] - mean[a]) * (p[b] - mean[b]) / j;
            }
        }
    }
    let ridge = 1e-6 * (cov.trace() / d as f64).max(1.0);
    for a in 0..d {
        cov[(a, a)] += ridge;
    }
    let scale = if dof > 2.0 { cov * ((dof - 2.0) / dof) } else { cov };
    Density::student_t(mean, scale, dof)
}

/// Run the chained inner layers; returns the `n_sir` final draws and
/// `log c_hat` per layer.
fn run_layers(
    cfg: &RadisConfig,
    emulators: &[Arc<dyn Emulator>],
    aux: &Density,
    n_sir: usize,
    domain: Option<&SupportBox>,
    rng: &mut Rng,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let depth = emulators.len();
    let regularized = cfg.resampling == Resampling::Regularized;
    let next_count = |d: usize| if d + 1 < depth { cfg.layers[d + 1].batch_size } else { n_sir };
    let mut log_c = Vec::with_capacity(depth);

    let first: InnerBatch = if depth == 1 && regularized {
        sir_step(&emulators[0], aux, cfg.layers[0].batch_size, 0, rng)?
    } else {
        sir_step(&emulators[0], aux, cfg.layers[0].batch_size, next_count(0), rng)?
    };
    log_c.push(first.log_c_hat);
    if depth == 1 {
        let pts = if regularized {
            regularize(&first.aux_samples, &first.log_gamma, n_sir, domain, rng)?
        } else {
            first.resampled_points()
        };
        return Ok((pts, log_c));
    }
    let mut pool = first.resampled_points();
    for d in 1..depth {
        let prev = &emulators[d - 1];
        let prev_c = log_c[d - 1];
        let log_gamma: Vec<f64> = pool
            .par_iter()
            .map(|z| emulators[d].log_eval(z) - (prev.log_eval(z) - prev_c))
            .collect();
        let lc = estimate_log_normalizer(&log_gamma)?;
        log_c.push(lc);
        let count = next_count(d);
        pool = if d + 1 == depth && regularized {
            regularize(&pool, &log_gamma, count, domain, rng)?
        } else {
            multinomial_resample(&log_gamma, count, rng)?.into_iter().map(|i| pool[i].clone()).collect()
        };
    }
    Ok((pool, log_c))
}

fn regularize(
    pool: &[Vec<f64>],
    log_gamma: &[f64],
    n: usize,
    domain: Option<&SupportBox>,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    let h = silverman_bandwidth(pool, log_gamma)?;
    regularized_resample(pool, log_gamma, n, &h, domain, rng)
}

/// Single- or multi-layer run; one code path serves both.
pub fn run_radis(target: &TargetDensity, cfg: &RadisConfig, rng: &mut Rng) -> Result<RadisOutput> {
    Radis::new(target, cfg).run(rng)
}

/// Multi-layer run. With one layer this is exactly [`run_radis`].
pub fn run_deep_radis(target: &TargetDensity, cfg: &RadisConfig, rng: &mut Rng) -> Result<RadisOutput> {
    run_radis(target, cfg, rng)
}

/// Metropolis chain that seeds a run: its states become pre-evaluated nodes
/// and the centres of an equal Gaussian mixture `q_par` with scale `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaisSeeding {
    pub chain_length: usize,
    pub xi: f64,
    pub init_box: SupportBox,
}

/// Chain first, then a run whose parametric component is the chain mixture.
/// The ledger covers both stages: `N_LAIS + |S_0| + N T`.
pub fn run_radis_lais(
    target: &TargetDensity,
    cfg: &RadisConfig,
    seeding: &LaisSeeding,
    rng: &mut Rng,
) -> Result<RadisOutput> {
    let start_evals = target.evaluations();
    let lais = crate::baselines::LaisConfig {
        chain_length: seeding.chain_length,
        xi: seeding.xi,
        budget: usize::MAX,
        init_box: seeding.init_box.clone(),
    };
    let chain = crate::baselines::lais_chain(target, &lais, rng)?;
    let q_par = adaptive_parametric_mixture(&chain.states, seeding.xi)?;
    let mut out = Radis::new(target, cfg).with_initial_nodes(chain.states, chain.log_pi).with_parametric(q_par).run(rng)?;
    out.evaluations = target.evaluations() - start_evals;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulator::FnEmulator;
    use approx::assert_relative_eq;

    fn gauss_target(dim: usize, lo: f64, hi: f64) -> TargetDensity {
        TargetDensity::new(dim, Domain::Bounded(SupportBox::cube(dim, lo, hi).unwrap()), |x: &[f64]| {
            -0.5 * x.iter().map(|v| v * v).sum::<f64>()
        })
    }

    fn constant_term(log_val: f64, log_c: f64, alpha: f64) -> MixtureTerm {
        MixtureTerm { alpha, emulator: Arc::new(FnEmulator::new(1, move |_x: &[f64]| log_val)), log_c_hat: log_c }
    }

    #[test]
    fn zero_iterations_rejected() {
        let t = gauss_target(2, -5.0, 5.0);
        let cfg = RadisConfig::nn(0, 10, 200, 10);
        assert!(matches!(run_radis(&t, &cfg, &mut Rng::new(0)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn batch_smaller_than_n_rejected() {
        let cfg = RadisConfig::nn(5, 10, 5, 10);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn equal_deep_batch_sizes_rejected() {
        let mut cfg = RadisConfig::nn(5, 10, 200, 10);
        cfg.layers.push(LayerConfig { emulator: EmulatorSpec::nn(1), batch_size: 200 });
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unbounded_nn_without_parametric_rejected() {
        let t = TargetDensity::new(1, Domain::Unbounded, |x: &[f64]| -0.5 * x[0] * x[0]);
        let mut cfg = RadisConfig::nn(3, 5, 100, 0);
        cfg.initial_nodes.points = vec![vec![0.0], vec![1.0]];
        assert!(matches!(run_radis(&t, &cfg, &mut Rng::new(1)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn ledger_is_exact_budget() {
        let t = gauss_target(2, -5.0, 5.0);
        let cfg = RadisConfig::nn(7, 9, 180, 12);
        let out = run_radis(&t, &cfg, &mut Rng::new(2)).unwrap();
        assert_eq!(out.evaluations as usize, cfg.budget(2));
        assert_eq!(out.particles.len(), 63);
        assert_eq!(out.trace.len(), 7);
    }

    #[test]
    fn deterministic_given_seed() {
        let t = gauss_target(2, -5.0, 5.0);
        let cfg = RadisConfig::nn(5, 10, 200, 10)
            .with_parametric(ProposalSpec::Uniform { lower: vec![-5.0; 2], upper: vec![5.0; 2] }, AlphaSchedule::Fixed { value: 0.5 });
        let a = run_radis(&t, &cfg, &mut Rng::new(9)).unwrap();
        let b = run_radis(&t.fresh(), &cfg, &mut Rng::new(9)).unwrap();
        assert_eq!(a.particles, b.particles);
        assert_eq!(a.evidence.to_bits(), b.evidence.to_bits());
    }

    #[test]
    fn single_iteration_single_node_is_uniform_is() {
        // one node -> constant emulator on the box, so the outer weight is pi(x) |X|
        let t = gauss_target(2, -4.0, 4.0);
        let mut cfg = RadisConfig::nn(1, 50, 1000, 0);
        cfg.initial_nodes.points = vec![vec![0.3, -0.2]];
        let out = run_radis(&t, &cfg, &mut Rng::new(4)).unwrap();
        for p in out.particles.particles() {
            let oracle = p.log_target + 64f64.ln();
            assert!((p.log_weight - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn outer_weight_single_term_is_plain_is() {
        let em: Arc<dyn Emulator> = Arc::new(FnEmulator::new(1, |x: &[f64]| -x[0].abs()));
        let term = MixtureTerm { alpha: 0.0, emulator: em.clone(), log_c_hat: 0.7 };
        let xs = vec![vec![0.2], vec![-1.3], vec![2.0]];
        let lp = vec![-0.1, -2.0, 0.4];
        let w = outer_log_weights(&xs, &lp, &[term], None).unwrap();
        for i in 0..3 {
            let plain = lp[i] - (em.log_eval(&xs[i]) - 0.7);
            assert_eq!(w[i].to_bits(), plain.to_bits());
        }
    }

    #[test]
    fn exact_emulators_give_constant_weights() {
        let z = 2.5f64;
        let f = |x: &[f64]| -0.5 * x[0] * x[0];
        let terms: Vec<MixtureTerm> = (0..4)
            .map(|_| MixtureTerm { alpha: 0.0, emulator: Arc::new(FnEmulator::new(1, f)), log_c_hat: z.ln() })
            .collect();
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.3 - 1.0]).collect();
        let lp: Vec<f64> = xs.iter().map(|x| f(x)).collect();
        let w = outer_weights(&xs, &lp.iter().map(|v| v.exp()).collect::<Vec<_>>(), &terms, None).unwrap();
        for v in w {
            assert_relative_eq!(v, z, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_iteration_hand_example() {
        // domain {0, 1}: pi = (1, 3); pi_hat_1 = (1, 1), c_1 = 2; pi_hat_2 = (1, 2), c_2 = 3
        let e1: Arc<dyn Emulator> = Arc::new(FnEmulator::new(1, |_x: &[f64]| 0.0));
        let e2: Arc<dyn Emulator> = Arc::new(FnEmulator::new(1, |x: &[f64]| if x[0] < 0.5 { 0.0 } else { 2f64.ln() }));
        let terms = vec![
            MixtureTerm { alpha: 0.0, emulator: e1, log_c_hat: 2f64.ln() },
            MixtureTerm { alpha: 0.0, emulator: e2, log_c_hat: 3f64.ln() },
        ];
        let w = outer_weights(&[vec![0.0], vec![1.0]], &[1.0, 3.0], &terms, None).unwrap();
        // x = 0: denominator (1/2 + 1/3) / 2 = 5/12 -> w = 12/5
        // x = 1: denominator (1/2 + 2/3) / 2 = 7/12 -> w = 36/7
        assert_relative_eq!(w[0], 12.0 / 5.0, epsilon = 1e-12);
        assert_relative_eq!(w[1], 36.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_denominator_is_error() {
        let term = constant_term(f64::NEG_INFINITY, 0.0, 0.0);
        assert!(matches!(
            outer_log_weights(&[vec![0.0]], &[0.0], &[term], None),
            Err(Error::ZeroDenominator { index: 0 })
        ));
    }

    #[test]
    fn mixture_proposal_cases() {
        let b = SupportBox::cube(1, 0.0, 2.0).unwrap();
        let q = Arc::new(Density::uniform(b.clone()));
        let em: Arc<dyn Emulator> = Arc::new(FnEmulator::new(1, |_x: &[f64]| 0.0));
        // emulator uniform with c = 2 -> normalized 1/2 = q
        let half = mixture_proposal(em.clone(), 2.0, Some(q.clone()), 0.5).unwrap();
        for x in [0.1, 1.0, 1.9] {
            assert_relative_eq!(half.log_density(&[x]).exp(), 0.5, epsilon = 1e-12);
        }
        let par = mixture_proposal(em.clone(), 4.0, Some(q.clone()), 1.0).unwrap();
        assert_relative_eq!(par.log_density(&[0.4]).exp(), 0.5, epsilon = 1e-12);
        let pure = mixture_proposal(em.clone(), 4.0, None, 0.0).unwrap();
        assert_relative_eq!(pure.log_density(&[0.4]).exp(), 0.25, epsilon = 1e-12);
        assert!(mixture_proposal(em.clone(), 1.0, Some(q.clone()), 1.5).is_err());

        let mut rng = Rng::new(3);
        let draws = half.sample(100, &Density::uniform(b), 2000, &mut rng).unwrap();
        assert_eq!(draws.len(), 100);
        assert!(draws.iter().all(|x| (0.0..=2.0).contains(&x[0])));
    }

    #[test]
    fn parametric_mixture_cases() {
        let single = adaptive_parametric_mixture(&[vec![1.0, 2.0]], 1.5).unwrap();
        let g = Density::gaussian_isotropic(vec![1.0, 2.0], 1.5).unwrap();
        assert_relative_eq!(single.log_density(&[0.3, 0.1]), g.log_density(&[0.3, 0.1]), epsilon = 1e-12);

        let sym = adaptive_parametric_mixture(&[vec![-2.0], vec![2.0]], 1.0).unwrap();
        for x in [0.3, 1.7, 4.0] {
            assert_relative_eq!(sym.log_density(&[x]), sym.log_density(&[-x]), epsilon = 1e-12);
        }
        assert!(adaptive_parametric_mixture(&[], 1.0).is_err());
    }

    #[test]
    fn deep_single_layer_equals_run_radis_bitwise() {
        let t = gauss_target(2, -5.0, 5.0);
        let cfg = RadisConfig::nn(6, 10, 200, 10);
        let a = run_radis(&t, &cfg, &mut Rng::new(21)).unwrap();
        let b = run_deep_radis(&t.fresh(), &cfg, &mut Rng::new(21)).unwrap();
        assert_eq!(a.particles, b.particles);
        assert_eq!(a.log_c_hat(), b.log_c_hat());
    }

    #[test]
    fn deep_nn_gp_keeps_budget() {
        let t = gauss_target(2, -5.0, 5.0);
        let mut cfg = RadisConfig::nn(4, 10, 400, 10);
        cfg.layers.push(LayerConfig { emulator: EmulatorSpec::Gp(GpSpec::default()), batch_size: 100 });
        let out = run_deep_radis(&t, &cfg, &mut Rng::new(5)).unwrap();
        assert_eq!(out.evaluations as usize, cfg.budget(2));
        assert_eq!(out.layer_log_c_hat[0].len(), 2);
        assert!(out.evidence.is_finite() && out.evidence > 0.0);
    }

    #[test]
    fn regularized_mode_runs_in_domain() {
        let t = gauss_target(2, -3.0, 3.0);
        let mut cfg = RadisConfig::nn(4, 10, 200, 10);
        cfg.resampling = Resampling::Regularized;
        let out = run_radis(&t, &cfg, &mut Rng::new(6)).unwrap();
        let dom = SupportBox::cube(2, -3.0, 3.0).unwrap();
        assert!(out.particles.particles().iter().all(|p| dom.contains(&p.x)));
        assert_eq!(out.evaluations as usize, cfg.budget(2));
    }

    #[test]
    fn unbounded_gp_with_student_aux() {
        let t = TargetDensity::new(2, Domain::Unbounded, |x: &[f64]| -0.5 * (x[0] * x[0] + x[1] * x[1]));
        let mut cfg = RadisConfig::nn(5, 10, 300, 0);
        cfg.layers = vec![LayerConfig { emulator: EmulatorSpec::Gp(GpSpec::default()), batch_size: 300 }];
        cfg.initial_nodes = InitialNodes::in_region(20, SupportBox::cube(2, -3.0, 3.0).unwrap());
        cfg.parametric = Some(ProposalSpec::StudentT { loc: vec![0.0, 0.0], scale: 3.0, dof: 3.0 });
        cfg.alpha = AlphaSchedule::Fixed { value: 0.3 };
        let out = run_radis(&t, &cfg, &mut Rng::new(8)).unwrap();
        let z = 2.0 * std::f64::consts::PI;
        assert!((out.evidence / z - 1.0).abs() < 0.3, "{}", out.evidence);
    }

    #[test]
    fn gaussian_evidence_is_accurate() {
        let t = gauss_target(2, -6.0, 6.0);
        let cfg = RadisConfig::nn(30, 20, 1000, 20);
        let out = run_radis(&t, &cfg, &mut Rng::new(12)).unwrap();
        let z = 2.0 * std::f64::consts::PI;
        assert!((out.evidence / z - 1.0).abs() < 0.05, "{}", out.evidence);
    }

    #[test]
    fn alpha_schedules() {
        let d = AlphaSchedule::default();
        assert_relative_eq!(d.at(0, 10), 0.5);
        assert_relative_eq!(d.at(10, 10), 0.05);
        let mut last = 1.0;
        for t in 1..=10 {
            assert!(d.at(t, 10) <= last);
            last = d.at(t, 10);
        }
        assert_eq!(AlphaSchedule::Fixed { value: 0.5 }.at(3, 10), 0.5);
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = RadisConfig::nn(100, 10, 1000, 10).with_parametric(
            ProposalSpec::Uniform { lower: vec![-10.0, -10.0], upper: vec![10.0, 10.0] },
            AlphaSchedule::Fixed { value: 0.5 },
        );
        let text = toml::to_string(&cfg).unwrap();
        let back: RadisConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
    #[test]
    fn lais_seeded_run_budget() {
        let t = TargetDensity::new(2, Domain::Unbounded, |x: &[f64]| -0.5 * (x[0] * x[0] + x[1] * x[1]));
        let mut cfg = RadisConfig::nn(5, 20, 400, 0);
        cfg.alpha = AlphaSchedule::Fixed { value: 0.5 };
        let seeding = LaisSeeding { chain_length: 100, xi: 1.0, init_box: SupportBox::cube(2, -3.0, 3.0).unwrap() };
        let out = run_radis_lais(&t, &cfg, &seeding, &mut Rng::new(3)).unwrap();
        assert_eq!(out.evaluations, 200);
        assert_eq!(t.evaluations(), 200);
        assert!(out.parametric.is_some());
        let z = 2.0 * std::f64::consts::PI;
        assert!((out.evidence / z - 1.0).abs() < 0.3, "{}", out.evidence);
    }
}
