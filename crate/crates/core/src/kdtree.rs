//! Static k-d tree for exact k-nearest-neighbour queries.
//!
//! Neighbours are ordered by `(squared distance, index)`, so equidistant
//! nodes resolve to the lowest index. Above [`MAX_TREE_DIM`] dimensions the
//! tree degrades to a linear scan with the same ordering.

pub const MAX_TREE_DIM: usize = 20;
const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    perm: Vec<usize>,
    split: Vec<usize>,
    linear: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn before(&self, other: &Neighbor) -> bool {
        self.dist2 < other.dist2 || (self.dist2 == other.dist2 && self.index < other.index)
    }
}

/// Bounded sorted list of the best `k` candidates.
struct Best {
    k: usize,
    items: Vec<Neighbor>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best { k, items: Vec::with_capacity(k + 1) }
    }

    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst_dist2(&self) -> f64 {
        if self.full() {
            self.items[self.k - 1].dist2
        } else {
            f64::INFINITY
        }
    }

    fn offer(&mut self, cand: Neighbor) {
        if self.full() && !cand.before(&self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.iter().position(|n| cand.before(n)).unwrap_or(self.items.len());
        self.items.insert(pos, cand);
        self.items.truncate(self.k);
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    /// Build over a flat row-major buffer of `points.len() / dim` points.
    pub fn build(dim: usize, points: Vec<f64>) -> Self {
        assert!(dim > 0 && points.len() % dim == 0, "flat buffer must hold whole points");
        let n = points.len() / dim;
        let mut tree = KdTree {
            dim,
            points,
            perm: (0..n).collect(),
            split: vec![0; n],
            linear: dim > MAX_TREE_DIM,
        };
        if !tree.linear {
            tree.build_range(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build_range(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let dim = self.dim;
        // split on the coordinate with the largest spread
        let mut best_d = 0;
        let mut best_spread = -1.0;
        for d in 0..dim {
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.perm[lo..hi] {
                let v = self.points[i * dim + d];
                mn = mn.min(v);
                mx = mx.max(v);
            }
            if mx - mn > best_spread {
                best_spread = mx - mn;
                best_d = d;
            }
        }
        let mid = (lo + hi) / 2;
        let pts = &self.points;
        self.perm[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a * dim + best_d].total_cmp(&pts[b * dim + best_d])
        });
        self.split[mid] = best_d;
        self.build_range(lo, mid);
        self.build_range(mid + 1, hi);
    }

    /// The `k` nearest points to `x`, closest first.
    pub fn nearest_k(&self, x: &[f64], k: usize) -> Vec<Neighbor> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut best = Best::new(k);
        if self.linear {
            for i in 0..self.len() {
                best.offer(Neighbor { index: i, dist2: dist2(self.point(i), x) });
            }
        } else {
            self.search(0, self.len(), x, &mut best);
        }
        best.items
    }

    pub fn nearest(&self, x: &[f64]) -> Option<Neighbor> {
        self.nearest_k(x, 1).into_iter().next()
    }

    fn search(&self, lo: usize, hi: usize, x: &[f64], best: &mut Best) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.perm[lo..hi] {
                best.offer(Neighbor { index: i, dist2: dist2(self.point(i), x) });
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.perm[mid];
        let d = self.split[mid];
        let diff = x[d] - self.points[i * self.dim + d];
        best.offer(Neighbor { index: i, dist2: dist2(self.point(i), x) });
        let (near, far) = if diff <= 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, x, best);
        // `<=` keeps equidistant candidates reachable for the index tie-break
        if diff * diff <= best.worst_dist2() {
            self.search(far.0, far.1, x, best);
        }
    }
}
