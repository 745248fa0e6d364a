//! Serializable summary of one sampler run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::weights::WeightedParticleSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    /// Echo of the configuration that produced the run.
    pub config: serde_json::Value,
    pub seed: u64,
    pub evidence: f64,
    /// Self-normalized posterior mean; empty if every weight is zero.
    pub mean: Vec<f64>,
    pub ess: f64,
    /// Per-iteration inner normalizer estimates (empty for baselines).
    pub c_hat: Vec<f64>,
    /// Target evaluations charged to the run.
    pub evaluations: u64,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn from_particles<C: Serialize>(
        algorithm: impl Into<String>,
        config: &C,
        seed: u64,
        particles: &WeightedParticleSet,
        c_hat: Vec<f64>,
        evaluations: u64,
    ) -> Result<Self> {
        Ok(RunRecord {
            algorithm: algorithm.into(),
            config: serde_json::to_value(config)?,
            seed,
            evidence: particles.evidence(),
            mean: particles.mean().unwrap_or_default(),
            ess: particles.ess().unwrap_or(0.0),
            c_hat,
            evaluations,
            wall_time_s: 0.0,
            extra: BTreeMap::new(),
        })
    }

    pub fn with_wall_time(mut self, seconds: f64) -> Self {
        self.wall_time_s = seconds;
        self
    }

    pub fn with_extra(mut self, key: impl Into<String>, value: f64) -> Self {
        self.extra.insert(key.into(), value);
        self
    }
}
