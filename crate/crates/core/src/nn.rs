//! Piecewise-constant nearest-neighbour emulator on Voronoi cells.

use crate::emulator::Emulator;
use crate::error::{Error, Result};
use crate::nodes::NodeSet;
pub use crate::support::SupportBox;

/// `pi_hat(x)` = mean of `pi` over the `k` nearest nodes of `x`, zero
/// outside the support box. With `k = 1` this is the Voronoi interpolator.
#[derive(Debug, Clone)]
pub struct NnEmulator {
    nodes: NodeSet,
    k: usize,
    support: SupportBox,
    log_k: f64,
}

pub fn build_nn(node_set: NodeSet, k: usize, support: SupportBox) -> Result<NnEmulator> {
    if node_set.is_empty() {
        return Err(Error::Empty("node set"));
    }
    if k == 0 || k > node_set.len() {
        return Err(Error::arg(format!("k = {k} must lie in 1..={}", node_set.len())));
    }
    if support.dim() != node_set.dim() {
        return Err(Error::DimensionMismatch { expected: node_set.dim(), got: support.dim() });
    }
    Ok(NnEmulator { nodes: node_set, k, support, log_k: (k as f64).ln() })
}

impl NnEmulator {
    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn support(&self) -> &SupportBox {
        &self.support
    }
}

impl Emulator for NnEmulator {
    fn dim(&self) -> usize {
        self.nodes.dim()
    }

    fn log_eval(&self, x: &[f64]) -> f64 {
        if !self.support.contains(x) {
            return f64::NEG_INFINITY;
        }
        if self.k == 1 {
            let n = self.nodes.nearest(x).expect("emulator has nodes");
            return self.nodes.log_value(n.index);
        }
        let near = self.nodes.nearest_k(x, self.k);
        let max = near.iter().map(|n| self.nodes.log_value(n.index)).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        let s: f64 = near.iter().map(|n| (self.nodes.log_value(n.index) - max).exp()).sum();
        max + s.ln() - self.log_k
    }
}

/// Smallest box containing the previous box and every node.
pub fn expand_support(support: &SupportBox, node_set: &NodeSet) -> Result<SupportBox> {
    Ok(support.union(&node_set.bounding_box()?))
}

/// One Voronoi cell of a 1-D interpolator and its normalized mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell1d {
    pub node: usize,
    pub lower: f64,
    pub upper: f64,
    pub mass: f64,
}

/// Exact decomposition of a 1-D, `k = 1` emulator into a mixture of uniform
/// densities: cell `R_i` (midpoints between sorted nodes, clipped to the
/// support) with mass `pi(x_i)|R_i| / sum_j pi(x_j)|R_j|`. Cells are returned
/// in node-index order.
pub fn nn_mixture_decomposition_1d(em: &NnEmulator) -> Result<Vec<Cell1d>> {
    if em.dim() != 1 {
        return Err(Error::arg("mixture decomposition is defined for 1-D emulators"));
    }
    if em.k != 1 {
        return Err(Error::arg("mixture decomposition requires k = 1"));
    }
    let n = em.nodes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| em.nodes.point(a)[0].total_cmp(&em.nodes.point(b)[0]).then(a.cmp(&b)));
    let (lo, hi) = (em.support.lower()[0], em.support.upper()[0]);
    let mut cells = vec![Cell1d { node: 0, lower: 0.0, upper: 0.0, mass: 0.0 }; n];
    for (rank, &i) in order.iter().enumerate() {
        let x = em.nodes.point(i)[0];
        let left = if rank == 0 { lo } else { 0.5 * (em.nodes.point(order[rank - 1])[0] + x) };
        let right = if rank + 1 == n { hi } else { 0.5 * (x + em.nodes.point(order[rank + 1])[0]) };
        cells[i] = Cell1d { node: i, lower: left.clamp(lo, hi), upper: right.clamp(lo, hi), mass: 0.0 };
    }
    let log_mass: Vec<f64> = cells
        .iter()
        .map(|c| em.nodes.log_value(c.node) + (c.upper - c.lower).ln())
        .collect();
    let w = crate::weights::normalize_log_weights(&log_mass)?;
    for (c, m) in cells.iter_mut().zip(w) {
        c.mass = m;
    }
    Ok(cells)
}
