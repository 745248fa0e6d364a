//! Surrogates of the unnormalized target.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gp::GpSpec;

/// A cheap, evaluatable, non-negative surrogate `pi_hat` of `pi`.
pub trait Emulator: Send + Sync {
    fn dim(&self) -> usize;

    /// `log pi_hat(x)`; `-inf` where the emulator is zero.
    fn log_eval(&self, x: &[f64]) -> f64;

    fn eval(&self, x: &[f64]) -> f64 {
        self.log_eval(x).exp()
    }
}

impl<E: Emulator + ?Sized> Emulator for Arc<E> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_eval(&self, x: &[f64]) -> f64 {
        (**self).log_eval(x)
    }
}

impl<E: Emulator + ?Sized> Emulator for Box<E> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_eval(&self, x: &[f64]) -> f64 {
        (**self).log_eval(x)
    }
}

/// Emulator defined by a closure returning `log pi_hat`.
pub struct FnEmulator<F> {
    dim: usize,
    f: F,
}

impl<F> FnEmulator<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnEmulator { dim, f }
    }
}

impl<F> Emulator for FnEmulator<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Which construction a layer uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmulatorSpec {
    /// Mean of `pi` over the `k` nearest nodes (`k = 1` interpolates).
    Nn {
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Exponentiated GP regression of `log pi`.
    Gp(GpSpec),
}

fn default_k() -> usize {
    1
}

impl EmulatorSpec {
    pub fn nn(k: usize) -> Self {
        EmulatorSpec::Nn { k }
    }

    pub fn is_nn(&self) -> bool {
        matches!(self, EmulatorSpec::Nn { .. })
    }
}
