//! Benchmark targets, a synthetic inversion model and the grid oracle.

pub mod banana;
pub mod forward;
pub mod inversion;
pub mod mixture;
pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::TargetDensity;

pub use banana::{banana_logpdf, banana_target, BananaParams};
pub use forward::{CachedForward, ForwardModel, SyntheticForwardModel};
pub use inversion::{sequential_inversion, InversionProblem, InversionResult, SequentialConfig};
pub use mixture::{gaussian_mixture_logpdf, mixture_target};
pub use quadrature::{grid_quadrature, Grid, Quadrature};

/// Named target used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    Banana {
        #[serde(flatten)]
        params: BananaParams,
    },
    /// Equal mixture of three isotropic Gaussians, normalized.
    Mixture {
        #[serde(default = "default_mixture_dim")]
        dim: usize,
    },
}

fn default_mixture_dim() -> usize {
    10
}

impl TargetSpec {
    pub fn build(&self) -> Result<TargetDensity> {
        match self {
            TargetSpec::Banana { params } => banana_target(params),
            TargetSpec::Mixture { dim } => {
                if *dim == 0 {
                    return Err(Error::config("mixture dimension must be at least 1"));
                }
                Ok(mixture_target(*dim))
            }
        }
    }

    /// Known `Z` and mean, when available in closed form or from constants.
    pub fn truth(&self) -> Option<(f64, Vec<f64>)> {
        match self {
            TargetSpec::Banana { params } if *params == BananaParams::default() => {
                Some((banana::BANANA_Z, banana::BANANA_MEAN.to_vec()))
            }
            TargetSpec::Banana { .. } => None,
            TargetSpec::Mixture { dim } => Some((1.0, mixture::mixture_mean(*dim))),
        }
    }
}
