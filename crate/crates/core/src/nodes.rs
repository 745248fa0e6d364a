//! The growing set of evaluated support points shared by both emulators.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kdtree::{KdTree, Neighbor};
use crate::support::SupportBox;

/// Evaluated nodes `x_i` with their stored `log pi(x_i)`, plus a spatial index.
///
/// Nodes are only ever appended, so the first `J` nodes of a later set are
/// exactly an earlier set of size `J`.
#[derive(Debug, Clone)]
pub struct NodeSet {
    dim: usize,
    points: Vec<f64>,
    log_values: Vec<f64>,
    index: KdTree,
}

impl NodeSet {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "node dimension must be positive");
        NodeSet { dim, points: Vec::new(), log_values: Vec::new(), index: KdTree::build(dim, Vec::new()) }
    }

    /// Build from points and values, dropping near-duplicates.
    pub fn from_points(dim: usize, points: &[Vec<f64>], log_values: &[f64], dedup_tol: f64) -> Result<Self> {
        let mut set = NodeSet::new(dim);
        set.add_nodes(points, log_values, dedup_tol)?;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn log_value(&self, i: usize) -> f64 {
        self.log_values[i]
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn nearest(&self, x: &[f64]) -> Option<Neighbor> {
        self.index.nearest(x)
    }

    pub fn nearest_k(&self, x: &[f64], k: usize) -> Vec<Neighbor> {
        self.index.nearest_k(x, k)
    }

    pub fn bounding_box(&self) -> Result<SupportBox> {
        SupportBox::bounding(self.points())
    }

    /// Index of the node with the largest stored value.
    pub fn argmax(&self) -> Option<usize> {
        (0..self.len()).reduce(|best, i| if self.log_values[i] > self.log_values[best] { i } else { best })
    }

    /// Append evaluated points, skipping any within `dedup_tol` (Euclidean)
    /// of an existing node or of an earlier point in the same batch. The
    /// spatial index is rebuilt once per batch. Returns the number added.
    pub fn add_nodes(&mut self, points: &[Vec<f64>], log_values: &[f64], dedup_tol: f64) -> Result<usize> {
        if points.len() != log_values.len() {
            return Err(Error::arg("points and log values differ in length"));
        }
        let tol2 = dedup_tol * dedup_tol;
        let start = self.len();
        for (p, &lv) in points.iter().zip(log_values) {
            if p.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: p.len() });
            }
            if lv.is_nan() || lv == f64::INFINITY {
                return Err(Error::arg("node log value must not be NaN or +inf"));
            }
            if self.nearest(p).is_some_and(|n| n.dist2 <= tol2) {
                continue;
            }
            let fresh_dup = (start..self.len()).any(|j| {
                self.point(j).iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= tol2
            });
            if fresh_dup {
                continue;
            }
            self.points.extend_from_slice(p);
            self.log_values.push(lv);
        }
        let added = self.len() - start;
        if added > 0 {
            self.index = KdTree::build(self.dim, self.points.clone());
        }
        Ok(added)
    }

    /// The first `len` nodes.
    pub fn prefix(&self, len: usize) -> NodeSet {
        let len = len.min(self.len());
        NodeSet {
            dim: self.dim,
            points: self.points[..len * self.dim].to_vec(),
            log_values: self.log_values[..len].to_vec(),
            index: KdTree::build(self.dim, self.points[..len * self.dim].to_vec()),
        }
    }

    /// Nodes at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> NodeSet {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        let mut log_values = Vec::with_capacity(indices.len());
        for &i in indices {
            points.extend_from_slice(self.point(i));
            log_values.push(self.log_values[i]);
        }
        let index = KdTree::build(self.dim, points.clone());
        NodeSet { dim: self.dim, points, log_values, index }
    }

    /// CSV with header `x_1,...,x_d,log_pi`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|d| format!("x_{d}")).collect();
        header.push("log_pi".to_string());
        w.write_record(&header)?;
        for (p, lv) in self.points().zip(&self.log_values) {
            let mut row: Vec<String> = p.iter().map(f64::to_string).collect();
            row.push(lv.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parse the CSV written by [`NodeSet::write_csv`]. Rows are kept as-is
    /// (no deduplication). Errors carry the 1-based data row index.
    pub fn read_csv<R: Read>(reader: R) -> Result<NodeSet> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 || header.get(header.len() - 1) != Some("log_pi") {
            return Err(Error::Parse { row: 0, message: "header must be x_1..x_d,log_pi".into() });
        }
        let dim = header.len() - 1;
        let mut set = NodeSet::new(dim);
        for (row, rec) in r.records().enumerate() {
            let row = row + 1;
            let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
            if rec.len() != dim + 1 {
                return Err(Error::Parse { row, message: format!("expected {} fields, got {}", dim + 1, rec.len()) });
            }
            let mut vals = Vec::with_capacity(dim + 1);
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse { row, message: format!("not a number: {field:?}") })?;
                vals.push(v);
            }
            let lv = vals.pop().expect("dim + 1 fields");
            if lv.is_nan() || lv == f64::INFINITY || vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse { row, message: "non-finite coordinate or log value".into() });
            }
            set.points.extend_from_slice(&vals);
            set.log_values.push(lv);
        }
        set.index = KdTree::build(dim, set.points.clone());
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NodeSet> {
        NodeSet::read_csv(std::fs::File::open(path)?)
    }
}
