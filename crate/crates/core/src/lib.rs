//! Regression-based adaptive deep importance sampling.
//!
//! The proposal at each iteration is a cheap emulator of the unnormalized
//! target (a nearest-neighbour interpolator or an exponentiated Gaussian
//! process), sampled through an inner sampling-importance-resampling layer.
//! All draws are weighted at the end against the temporal mixture of every
//! proposal used. Baseline adaptive importance samplers, benchmark targets,
//! diagnostics and an experiment runner are included.

pub mod baselines;
pub mod diagnostics;
pub mod emulator;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod inner;
pub mod kdtree;
pub mod nn;
pub mod nodes;
pub mod proposal;
pub mod radis;
pub mod record;
pub mod rng;
pub mod support;
pub mod target;
pub mod targets;
pub mod weights;

pub use emulator::{Emulator, EmulatorSpec};
pub use error::{Error, Result};
pub use nodes::NodeSet;
pub use proposal::{Density, Proposal, ProposalSpec};
pub use rng::Rng;
pub use support::SupportBox;
pub use target::{Domain, TargetDensity};
pub use weights::{Particle, WeightedParticleSet};
