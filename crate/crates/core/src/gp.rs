//! Gaussian-process regression of `log pi`, exponentiated into a surrogate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::emulator::Emulator;
use crate::error::{Error, Result};
use crate::nodes::NodeSet;
use crate::support::SupportBox;

const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Squared-exponential kernel `exp(-|x - x'|^2 / (2 eps^2))` with nugget `zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpKernel {
    pub lengthscale: f64,
    pub noise: f64,
}

impl GpKernel {
    pub fn new(lengthscale: f64, noise: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::arg("lengthscale must be positive"));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::arg("noise must be non-negative"));
        }
        Ok(GpKernel { lengthscale, noise })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

/// Driver-level GP settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpSpec {
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Fixed lengthscale; tuned by marginal likelihood when absent.
    #[serde(default)]
    pub lengthscale: Option<f64>,
    /// Candidate lengthscales; defaults to a log-spaced grid scaled to the support.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default = "default_tune_every")]
    pub tune_every: usize,
    #[serde(default = "default_node_cap")]
    pub node_cap: usize,
    /// Fit around the mean of the clamped data instead of zero.
    #[serde(default)]
    pub constant_mean: bool,
    /// Data below `max(log pi) - floor_gap` are clamped up to that level.
    #[serde(default = "default_floor_gap")]
    pub floor_gap: f64,
}

fn default_noise() -> f64 {
    1e-6
}

fn default_tune_every() -> usize {
    5
}

fn default_node_cap() -> usize {
    2000
}

fn default_floor_gap() -> f64 {
    30.0
}

impl Default for GpSpec {
    fn default() -> Self {
        GpSpec {
            noise: default_noise(),
            lengthscale: None,
            grid: None,
            tune_every: default_tune_every(),
            node_cap: default_node_cap(),
            constant_mean: false,
            floor_gap: default_floor_gap(),
        }
    }
}

impl GpSpec {
    /// The explicit grid, or 16 log-spaced values from 1% to 100% of `diag`.
    pub fn grid_for(&self, diag: f64) -> Vec<f64> {
        match &self.grid {
            Some(g) => g.clone(),
            None => (0..16).map(|i| diag * 10f64.powf(-2.0 + 2.0 * i as f64 / 15.0)).collect(),
        }
    }
}

/// Optional data transforms applied before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub constant_mean: bool,
    /// See [`GpSpec::floor_gap`]; `None` leaves the data untouched.
    pub floor_gap: Option<f64>,
}

/// `pi_hat(x) = exp(m + sum_i beta_i k(x, x_i))`, optionally truncated to a box.
#[derive(Debug, Clone)]
pub struct GpEmulator {
    nodes: NodeSet,
    kernel: GpKernel,
    beta: DVector<f64>,
    mean: f64,
    jitter: f64,
    factor: Option<Cholesky<f64, Dyn>>,
    support: Option<SupportBox>,
}

fn kernel_matrix(nodes: &NodeSet, kernel: &GpKernel) -> DMatrix<f64> {
    let j = nodes.len();
    let mut k = DMatrix::zeros(j, j);
    for a in 0..j {
        k[(a, a)] = 1.0 + kernel.noise;
        for b in 0..a {
            let v = kernel.eval(nodes.point(a), nodes.point(b));
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    k
}

/// Cholesky of `K + zeta I`, escalating diagonal jitter on failure.
fn factorize(nodes: &NodeSet, kernel: &GpKernel) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let k = kernel_matrix(nodes, kernel);
    if let Some(c) = Cholesky::new(k.clone()) {
        return Ok((c, 0.0));
    }
    let scale = k.trace() / nodes.len() as f64;
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        let mut kj = k.clone();
        for i in 0..nodes.len() {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok((c, jitter));
        }
    }
    Err(Error::IllConditioned)
}

fn fit_data(nodes: &NodeSet, opts: &FitOptions) -> Result<(DVector<f64>, f64)> {
    let max = nodes.log_values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut phi: Vec<f64> = nodes.log_values().to_vec();
    match opts.floor_gap {
        Some(gap) if max.is_finite() => phi.iter_mut().for_each(|v| *v = v.max(max - gap)),
        _ => {
            if phi.iter().any(|v| !v.is_finite()) {
                return Err(Error::arg("GP data contain -inf; set a floor gap"));
            }
        }
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("GP data are all -inf"));
    }
    let mean = if opts.constant_mean { phi.iter().sum::<f64>() / phi.len() as f64 } else { 0.0 };
    Ok((DVector::from_iterator(phi.len(), phi.into_iter().map(|v| v - mean)), mean))
}

/// Zero-mean interpolating/regressing fit of the stored log values.
pub fn fit_gp(node_set: NodeSet, kernel: GpKernel) -> Result<GpEmulator> {
    fit_gp_with(node_set, kernel, FitOptions::default())
}

pub fn fit_gp_with(node_set: NodeSet, kernel: GpKernel, opts: FitOptions) -> Result<GpEmulator> {
    if node_set.is_empty() {
        return Err(Error::Empty("node set"));
    }
    let (phi, mean) = fit_data(&node_set, &opts)?;
    let (factor, jitter) = factorize(&node_set, &kernel)?;
    let beta = factor.solve(&phi);
    Ok(GpEmulator { nodes: node_set, kernel, beta, mean, jitter, factor: Some(factor), support: None })
}

/// `-1/2 phi^T (K + zeta I)^-1 phi - 1/2 log det(K + zeta I) - J/2 log 2 pi`.
pub fn log_marginal_likelihood(node_set: &NodeSet, kernel: GpKernel, opts: FitOptions) -> Result<f64> {
    let (phi, _) = fit_data(node_set, &opts)?;
    let (factor, _) = factorize(node_set, &kernel)?;
    let alpha = factor.solve(&phi);
    let log_det: f64 = 2.0 * factor.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let j = node_set.len() as f64;
    Ok(-0.5 * phi.dot(&alpha) - 0.5 * log_det - 0.5 * j * (2.0 * std::f64::consts::PI).ln())
}

/// Grid maximizer of the marginal likelihood; ties resolve to the smaller value.
pub fn tune_lengthscale(node_set: &NodeSet, noise: f64, grid: &[f64]) -> Result<f64> {
    tune_lengthscale_with(node_set, noise, grid, FitOptions::default())
}

pub fn tune_lengthscale_with(node_set: &NodeSet, noise: f64, grid: &[f64], opts: FitOptions) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("lengthscale grid"));
    }
    if node_set.len() < 2 && grid.len() > 1 {
        return Err(Error::arg("lengthscale tuning needs at least two nodes"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for eps in sorted {
        let Ok(kernel) = GpKernel::new(eps, noise) else { continue };
        let Ok(lml) = log_marginal_likelihood(node_set, kernel, opts) else { continue };
        if best.is_none_or(|(_, b)| lml > b) {
            best = Some((eps, lml));
        }
    }
    best.map(|(eps, _)| eps).ok_or(Error::IllConditioned)
}

/// Greedy farthest-point subset of size `cap`, seeded at the highest-valued
/// node. Returned indices are in ascending order.
pub fn farthest_point_thinning(node_set: &NodeSet, cap: usize) -> Vec<usize> {
    let j = node_set.len();
    if j <= cap {
        return (0..j).collect();
    }
    if cap == 0 {
        return Vec::new();
    }
    let d2 = |a: usize, b: usize| -> f64 {
        node_set.point(a).iter().zip(node_set.point(b)).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let first = node_set.argmax().expect("non-empty");
    let mut chosen = vec![first];
    let mut gap: Vec<f64> = (0..j).map(|i| d2(i, first)).collect();
    while chosen.len() < cap {
        let next = (0..j).fold(0, |best, i| if gap[i] > gap[best] { i } else { best });
        chosen.push(next);
        for (i, g) in gap.iter_mut().enumerate() {
            *g = g.min(d2(i, next));
        }
    }
    chosen.sort_unstable();
    chosen
}

impl GpEmulator {
    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn kernel(&self) -> GpKernel {
        self.kernel
    }

    pub fn beta(&self) -> &[f64] {
        self.beta.as_slice()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Diagonal jitter added on top of `zeta` to obtain a factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> Option<&Cholesky<f64, Dyn>> {
        self.factor.as_ref()
    }

    /// Drop the Cholesky factor; prediction only needs `beta`.
    pub fn without_factor(mut self) -> Self {
        self.factor = None;
        self
    }

    /// Make the emulator zero outside `support`.
    pub fn truncated(mut self, support: SupportBox) -> Self {
        self.support = Some(support);
        self
    }

    pub fn support(&self) -> Option<&SupportBox> {
        self.support.as_ref()
    }

    /// `phi_hat(x)`, ignoring truncation.
    pub fn predict_log(&self, x: &[f64]) -> f64 {
        let s: f64 = self.nodes.points().zip(self.beta.iter()).map(|(p, b)| b * self.kernel.eval(x, p)).sum();
        self.mean + s
    }
}

impl Emulator for GpEmulator {
    fn dim(&self) -> usize {
        self.nodes.dim()
    }

    fn log_eval(&self, x: &[f64]) -> f64 {
        if self.support.as_ref().is_some_and(|b| !b.contains(x)) {
            return f64::NEG_INFINITY;
        }
        self.predict_log(x)
    }
}
