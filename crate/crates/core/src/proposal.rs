//! Parametric densities used as auxiliary, parametric and baseline proposals.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng as _;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::support::SupportBox;
use crate::weights::log_sum_exp;

/// A density that can be sampled and evaluated.
pub trait Proposal: Send + Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut Rng) -> Vec<f64>;
    /// `log q(x)`; `-inf` outside the support.
    fn log_density(&self, x: &[f64]) -> f64;
}

/// Location-scale factor shared by the Gaussian and Student-t families.
#[derive(Debug, Clone)]
pub struct LocationScale {
    mean: DVector<f64>,
    /// Lower Cholesky factor of the covariance (or scale) matrix.
    chol: DMatrix<f64>,
    log_det_chol: f64,
}

impl LocationScale {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Empty("mean"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: cov.nrows() });
        }
        let chol = Cholesky::new(cov).ok_or_else(|| Error::arg("covariance is not positive definite"))?.l();
        let log_det_chol = chol.diagonal().iter().map(|v| v.ln()).sum();
        Ok(LocationScale { mean: DVector::from_vec(mean), chol, log_det_chol })
    }

    pub fn isotropic(mean: Vec<f64>, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::arg("scale must be positive"));
        }
        let d = mean.len();
        LocationScale::new(mean, DMatrix::from_diagonal_element(d, d, std * std))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    /// Squared Mahalanobis distance.
    fn maha2(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        match self.chol.solve_lower_triangular(&diff) {
            Some(z) => z.norm_squared(),
            None => f64::INFINITY,
        }
    }

    fn transform(&self, z: DVector<f64>) -> Vec<f64> {
        (&self.mean + &self.chol * z).as_slice().to_vec()
    }
}

/// The concrete proposal families.
#[derive(Debug, Clone)]
pub enum Density {
    Uniform(SupportBox),
    Gaussian(LocationScale),
    StudentT { ls: LocationScale, dof: f64 },
    Mixture(Mixture),
}

/// Finite mixture sampled with an alias table.
#[derive(Debug, Clone)]
pub struct Mixture {
    log_weights: Vec<f64>,
    components: Vec<Density>,
    alias: WeightedAliasIndex<f64>,
}

impl Mixture {
    pub fn components(&self) -> &[Density] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }
}

impl Density {
    pub fn uniform(support: SupportBox) -> Self {
        Density::Uniform(support)
    }

    pub fn gaussian(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Ok(Density::Gaussian(LocationScale::new(mean, cov)?))
    }

    pub fn gaussian_isotropic(mean: Vec<f64>, std: f64) -> Result<Self> {
        Ok(Density::Gaussian(LocationScale::isotropic(mean, std)?))
    }

    pub fn student_t(loc: Vec<f64>, scale: DMatrix<f64>, dof: f64) -> Result<Self> {
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(Error::arg("degrees of freedom must be positive"));
        }
        Ok(Density::StudentT { ls: LocationScale::new(loc, scale)?, dof })
    }

    /// Mixture with the given (unnormalized, non-negative) weights.
    pub fn mixture(weights: &[f64], components: Vec<Density>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("mixture components"));
        }
        if weights.len() != components.len() {
            return Err(Error::arg("mixture weights and components differ in length"));
        }
        let dim = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: c.dim() });
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::arg("mixture weights must be non-negative with a positive sum"));
        }
        let alias = WeightedAliasIndex::new(weights.to_vec()).map_err(|e| Error::arg(e.to_string()))?;
        let log_weights = weights.iter().map(|w| (w / total).ln()).collect();
        Ok(Density::Mixture(Mixture { log_weights, components, alias }))
    }

    /// Equal-weight mixture.
    pub fn equal_mixture(components: Vec<Density>) -> Result<Self> {
        let w = vec![1.0; components.len()];
        Density::mixture(&w, components)
    }

    /// Mean, where it exists (`dof > 1` for Student-t).
    pub fn mean(&self) -> Option<Vec<f64>> {
        match self {
            Density::Uniform(b) => Some(b.center()),
            Density::Gaussian(ls) => Some(ls.mean().to_vec()),
            Density::StudentT { ls, dof } => (*dof > 1.0).then(|| ls.mean().to_vec()),
            Density::Mixture(m) => {
                let mut acc = vec![0.0; self.dim()];
                for (c, lw) in m.components.iter().zip(&m.log_weights) {
                    let mc = c.mean()?;
                    for (a, v) in acc.iter_mut().zip(mc) {
                        *a += lw.exp() * v;
                    }
                }
                Some(acc)
            }
        }
    }
}

impl Proposal for Density {
    fn dim(&self) -> usize {
        match self {
            Density::Uniform(b) => b.dim(),
            Density::Gaussian(ls) => ls.dim(),
            Density::StudentT { ls, .. } => ls.dim(),
            Density::Mixture(m) => m.components[0].dim(),
        }
    }

    fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            Density::Uniform(b) => b.sample_uniform(rng),
            Density::Gaussian(ls) => {
                let z = DVector::from_iterator(ls.dim(), (0..ls.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)));
                ls.transform(z)
            }
            Density::StudentT { ls, dof } => {
                let z = DVector::from_iterator(ls.dim(), (0..ls.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let g: f64 = ChiSquared::new(*dof).expect("positive dof").sample(rng);
                ls.transform(z * (dof / g).sqrt())
            }
            Density::Mixture(m) => {
                let c = m.alias.sample(rng);
                m.components[c].sample(rng)
            }
        }
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Density::Uniform(b) => {
                if b.contains(x) {
                    -b.volume().ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Density::Gaussian(ls) => {
                let d = ls.dim() as f64;
                -0.5 * ls.maha2(x) - ls.log_det_chol - 0.5 * d * (2.0 * PI).ln()
            }
            Density::StudentT { ls, dof } => {
                let d = ls.dim() as f64;
                ln_gamma(0.5 * (dof + d)) - ln_gamma(0.5 * dof) - 0.5 * d * (dof * PI).ln() - ls.log_det_chol
                    - 0.5 * (dof + d) * (ls.maha2(x) / dof).ln_1p()
            }
            Density::Mixture(m) => {
                let terms: Vec<f64> =
                    m.components.iter().zip(&m.log_weights).map(|(c, lw)| lw + c.log_density(x)).collect();
                log_sum_exp(&terms).unwrap_or(f64::NEG_INFINITY)
            }
        }
    }
}

/// Serializable description of a [`Density`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProposalSpec {
    Uniform {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Either an isotropic `std` or a full `covariance`.
    Gaussian {
        mean: Vec<f64>,
        #[serde(default)]
        std: Option<f64>,
        #[serde(default)]
        covariance: Option<Vec<Vec<f64>>>,
    },
    StudentT {
        loc: Vec<f64>,
        scale: f64,
        dof: f64,
    },
    Mixture {
        weights: Vec<f64>,
        components: Vec<ProposalSpec>,
    },
}

impl ProposalSpec {
    pub fn build(&self) -> Result<Density> {
        match self {
            ProposalSpec::Uniform { lower, upper } => Ok(Density::uniform(SupportBox::new(lower.clone(), upper.clone())?)),
            ProposalSpec::Gaussian { mean, std, covariance } => match (std, covariance) {
                (Some(s), None) => Density::gaussian_isotropic(mean.clone(), *s),
                (None, Some(rows)) => Density::gaussian(mean.clone(), matrix_from_rows(rows, mean.len())?),
                _ => Err(Error::config("gaussian proposal needs exactly one of `std` or `covariance`")),
            },
            ProposalSpec::StudentT { loc, scale, dof } => {
                let d = loc.len();
                Density::student_t(loc.clone(), DMatrix::from_diagonal_element(d, d, scale * scale), *dof)
            }
            ProposalSpec::Mixture { weights, components } => {
                let built = components.iter().map(ProposalSpec::build).collect::<Result<Vec<_>>>()?;
                Density::mixture(weights, built)
            }
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::config(format!("covariance must be {d}x{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}
