//! Multimodal Gaussian mixture with known normalizer `Z = 1`.

use std::f64::consts::PI;

use crate::target::{Domain, TargetDensity};
use crate::weights::log_sum_exp;

/// Component standard deviation (covariance `16 I`).
pub const MIXTURE_STD: f64 = 4.0;

/// `[5, 0, ...]`, `[-7, 0, ...]` and `[1, ..., 1]`.
pub fn mixture_means(dim: usize) -> [Vec<f64>; 3] {
    let mut a = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    a[0] = 5.0;
    b[0] = -7.0;
    [a, b, vec![1.0; dim]]
}

pub fn mixture_mean(dim: usize) -> Vec<f64> {
    let m = mixture_means(dim);
    (0..dim).map(|k| (m[0][k] + m[1][k] + m[2][k]) / 3.0).collect()
}

/// Normalized log-density of the equal three-component mixture.
pub fn gaussian_mixture_logpdf(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let norm = -0.5 * d * (2.0 * PI * MIXTURE_STD * MIXTURE_STD).ln() - 3f64.ln();
    let terms: Vec<f64> = mixture_means(x.len())
        .iter()
        .map(|m| {
            let r2: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
            norm - 0.5 * r2 / (MIXTURE_STD * MIXTURE_STD)
        })
        .collect();
    log_sum_exp(&terms).expect("three components")
}

pub fn mixture_target(dim: usize) -> TargetDensity {
    TargetDensity::new(dim, Domain::Unbounded, gaussian_mixture_logpdf)
}
