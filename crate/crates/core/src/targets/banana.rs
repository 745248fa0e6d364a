//! Banana-shaped density on a box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proposal::Density;
use crate::support::SupportBox;
use crate::target::{Domain, TargetDensity};

/// Grid value of `Z` under the default parameters.
pub const BANANA_Z: f64 = 7.9976;
/// Grid mean under the default parameters.
pub const BANANA_MEAN: [f64; 2] = [-0.4841, 0.0];
/// Grid marginal variances under the default parameters (the covariance is diagonal).
pub const BANANA_VARIANCE: [f64; 2] = [1.37748, 8.90408];

/// `log pi(x) = -(offset - b x_1 - x_2^2)^2 / (2 eta0^2) - sum x_i^2 / (2 eta^2)`
/// on `[-half_width, half_width]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BananaParams {
    pub b: f64,
    pub offset: f64,
    pub eta0: f64,
    pub eta: f64,
    pub dim: usize,
    pub half_width: f64,
}

impl Default for BananaParams {
    fn default() -> Self {
        BananaParams { b: 10.0, offset: 4.0, eta0: 4.0, eta: 3.5, dim: 2, half_width: 10.0 }
    }
}

impl BananaParams {
    pub fn domain(&self) -> Result<SupportBox> {
        SupportBox::cube(self.dim, -self.half_width, self.half_width)
    }
}

pub fn banana_logpdf(x: &[f64], p: &BananaParams) -> f64 {
    let r = p.offset - p.b * x[0] - x[1] * x[1];
    let prior: f64 = x.iter().map(|v| v * v).sum::<f64>() / (2.0 * p.eta * p.eta);
    -r * r / (2.0 * p.eta0 * p.eta0) - prior
}

pub fn banana_target(p: &BananaParams) -> Result<TargetDensity> {
    if p.dim < 2 {
        return Err(Error::config("banana target needs dimension >= 2"));
    }
    if !(p.eta0 > 0.0 && p.eta > 0.0 && p.half_width > 0.0) {
        return Err(Error::config("banana scales must be positive"));
    }
    let params = p.clone();
    Ok(TargetDensity::new(p.dim, Domain::Bounded(p.domain()?), move |x: &[f64]| banana_logpdf(x, &params)))
}

/// Gaussian with the banana's mean and covariance.
pub fn banana_moment_gaussian() -> Density {
    let cov = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&BANANA_VARIANCE));
    Density::gaussian(BANANA_MEAN.to_vec(), cov).expect("positive variances")
}
