//! Unnormalized target densities with a central evaluation ledger.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::support::SupportBox;

/// Support of a target: a prior box, or the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Bounded(SupportBox),
    Unbounded,
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Bounded(b) => b.contains(x),
            Domain::Unbounded => true,
        }
    }

    pub fn as_box(&self) -> Option<&SupportBox> {
        match self {
            Domain::Bounded(b) => Some(b),
            Domain::Unbounded => None,
        }
    }
}

type LogDensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Evaluatable unnormalized log-posterior `log pi(x)`.
///
/// Every call to [`TargetDensity::log_pi`] increments the evaluation ledger
/// by one, including calls outside a bounded domain (which return `-inf`).
/// Samplers never keep their own counts; budget fairness is read from here.
pub struct TargetDensity {
    log_pi: Arc<LogDensityFn>,
    dim: usize,
    domain: Domain,
    evaluations: AtomicU64,
}

impl TargetDensity {
    pub fn new<F>(dim: usize, domain: Domain, log_pi: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        TargetDensity { log_pi: Arc::new(log_pi), dim, domain, evaluations: AtomicU64::new(0) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn log_pi(&self, x: &[f64]) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        if x.len() != self.dim || !self.domain.contains(x) {
            return f64::NEG_INFINITY;
        }
        (self.log_pi)(x)
    }

    /// Evaluate without touching the ledger. For diagnostics and
    /// ground-truth computations only.
    pub fn log_pi_uncounted(&self, x: &[f64]) -> f64 {
        if x.len() != self.dim || !self.domain.contains(x) {
            return f64::NEG_INFINITY;
        }
        (self.log_pi)(x)
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Fresh ledger sharing the same density.
    pub fn fresh(&self) -> TargetDensity {
        TargetDensity {
            log_pi: Arc::clone(&self.log_pi),
            dim: self.dim,
            domain: self.domain.clone(),
            evaluations: AtomicU64::new(0),
        }
    }
}

impl fmt::Debug for TargetDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetDensity")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("evaluations", &self.evaluations())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_counts_every_call() {
        let b = SupportBox::cube(1, 0.0, 1.0).unwrap();
        let t = TargetDensity::new(1, Domain::Bounded(b), |x| -x[0]);
        assert_eq!(t.log_pi(&[0.5]), -0.5);
        assert_eq!(t.log_pi(&[2.0]), f64::NEG_INFINITY);
        assert_eq!(t.log_pi(&[0.5]), -0.5);
        assert_eq!(t.evaluations(), 3);
        t.log_pi_uncounted(&[0.1]);
        assert_eq!(t.evaluations(), 3);
        assert_eq!(t.fresh().evaluations(), 0);
    }

    #[test]
    fn ledger_is_thread_safe() {
        let t = TargetDensity::new(1, Domain::Unbounded, |x| x[0]);
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    for i in 0..1000 {
                        t.log_pi(&[i as f64]);
                    }
                });
            }
        });
        assert_eq!(t.evaluations(), 4000);
    }
}
