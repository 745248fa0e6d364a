//! Forward models `h: R^dx -> R^dy` and a shared evaluation cache.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::support::SupportBox;

pub trait ForwardModel: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Errors with [`Error::OutOfDomain`] outside the model's input box.
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;
}

pub const SYNTHETIC_INPUTS: usize = 6;
pub const SYNTHETIC_OUTPUTS: usize = 64;
/// Inputs whose sensitivity is scaled down.
pub const WEAK_INPUTS: [usize; 2] = [0, 2];
const WEAK_SCALE: f64 = 0.08;

const EMBEDDED: &str = include_str!("../../data/synthetic_forward.csv");

/// `y_j = sum_i a_ji sin(b_ji u_i + c_ji) + sum_i d_ji u_i^2`, with `u` the
/// input rescaled to the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticForwardModel {
    prior: SupportBox,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

/// Leaf-property style ranges used as the prior box.
pub fn synthetic_prior() -> SupportBox {
    SupportBox::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], vec![3.0, 100.0, 25.0, 1.0, 0.05, 0.02]).expect("valid box")
}

impl SyntheticForwardModel {
    /// The committed constants.
    pub fn new() -> Self {
        Self::read_csv(EMBEDDED.as_bytes()).expect("embedded constants parse")
    }

    /// Draw fresh constants from `seed`.
    pub fn generate(seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let n = SYNTHETIC_INPUTS * SYNTHETIC_OUTPUTS;
        let (mut a, mut b, mut c, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for j in 0..SYNTHETIC_OUTPUTS {
            for i in 0..SYNTHETIC_INPUTS {
                let k = j * SYNTHETIC_INPUTS + i;
                let weak = if WEAK_INPUTS.contains(&i) { WEAK_SCALE } else { 1.0 };
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                a[k] = weak * sign * rng.random_range(0.5..1.5);
                b[k] = rng.random_range(1.0..4.0);
                c[k] = rng.random_range(0.0..2.0 * PI);
                d[k] = weak * rng.random_range(-0.5..0.5);
            }
        }
        SyntheticForwardModel { prior: synthetic_prior(), a, b, c, d }
    }

    pub fn prior(&self) -> &SupportBox {
        &self.prior
    }

    /// Rows `param,j,i,value` with shortest round-trip decimal values.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["param", "j", "i", "value"])?;
        for (name, vals) in [("a", &self.a), ("b", &self.b), ("c", &self.c), ("d", &self.d)] {
            for (k, v) in vals.iter().enumerate() {
                let (j, i) = (k / SYNTHETIC_INPUTS, k % SYNTHETIC_INPUTS);
                w.write_record([name.to_string(), j.to_string(), i.to_string(), format!("{v:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let n = SYNTHETIC_INPUTS * SYNTHETIC_OUTPUTS;
        let mut vals = [vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]];
        let mut r = csv::Reader::from_reader(reader);
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |m: &str| Error::Parse { row: row + 1, message: m.to_string() };
            if rec.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let p = match &rec[0] {
                "a" => 0,
                "b" => 1,
                "c" => 2,
                "d" => 3,
                _ => return Err(bad("unknown parameter name")),
            };
            let j: usize = rec[1].parse().map_err(|_| bad("bad output index"))?;
            let i: usize = rec[2].parse().map_err(|_| bad("bad input index"))?;
            let v: f64 = rec[3].parse().map_err(|_| bad("bad value"))?;
            if j >= SYNTHETIC_OUTPUTS || i >= SYNTHETIC_INPUTS {
                return Err(bad("index out of range"));
            }
            vals[p][j * SYNTHETIC_INPUTS + i] = v;
        }
        if vals.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Parse { row: 0, message: "missing constants".into() });
        }
        let [a, b, c, d] = vals;
        Ok(SyntheticForwardModel { prior: synthetic_prior(), a, b, c, d })
    }
}

impl Default for SyntheticForwardModel {
    fn default() -> Self {
        Self::new()
    }
}

impl ForwardModel for SyntheticForwardModel {
    fn input_dim(&self) -> usize {
        SYNTHETIC_INPUTS
    }

    fn output_dim(&self) -> usize {
        SYNTHETIC_OUTPUTS
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != SYNTHETIC_INPUTS {
            return Err(Error::DimensionMismatch { expected: SYNTHETIC_INPUTS, got: x.len() });
        }
        if !self.prior.contains(x) {
            return Err(Error::OutOfDomain);
        }
        let u = self.prior.normalize(x);
        Ok((0..SYNTHETIC_OUTPUTS)
            .map(|j| {
                (0..SYNTHETIC_INPUTS)
                    .map(|i| {
                        let k = j * SYNTHETIC_INPUTS + i;
                        self.a[k] * (self.b[k] * u[i] + self.c[k]).sin() + self.d[k] * u[i] * u[i]
                    })
                    .sum()
            })
            .collect())
    }
}

type Key = Vec<u64>;

fn key(x: &[f64]) -> Key {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Forward model with a shared output cache. Only promoted points are
/// served from the cache; every other call reaches the model and is
/// remembered in a scratch map until [`CachedForward::reset_scratch`], so a
/// point solved in this problem can still be promoted without recomputing.
pub struct CachedForward {
    model: Arc<dyn ForwardModel>,
    shared: RwLock<HashMap<Key, Vec<f64>>>,
    scratch: Mutex<HashMap<Key, Vec<f64>>>,
    evaluations: AtomicU64,
    hits: AtomicU64,
}

impl CachedForward {
    pub fn new(model: Arc<dyn ForwardModel>) -> Self {
        CachedForward {
            model,
            shared: RwLock::new(HashMap::new()),
            scratch: Mutex::new(HashMap::new()),
            evaluations: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        }
    }

    /// Calls that reached the underlying model since construction; `clear`
    /// does not reset this.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Calls answered from a cache.
    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn shared_len(&self) -> usize {
        self.shared.read().expect("cache lock").len()
    }

    /// Drop every cached output.
    pub fn clear(&self) {
        self.shared.write().expect("cache lock").clear();
        self.reset_scratch();
    }

    pub fn reset_scratch(&self) {
        self.scratch.lock().expect("cache lock").clear();
    }

    /// Keep the output at `x` across problems. Returns `false` if `x` was
    /// never evaluated (nothing is computed).
    pub fn promote(&self, x: &[f64]) -> bool {
        let k = key(x);
        if self.shared.read().expect("cache lock").contains_key(&k) {
            return true;
        }
        let found = self.scratch.lock().expect("cache lock").get(&k).cloned();
        match found {
            Some(y) => {
                self.shared.write().expect("cache lock").insert(k, y);
                true
            }
            None => false,
        }
    }
}

impl ForwardModel for CachedForward {
    fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.model.output_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let k = key(x);
        if let Some(y) = self.shared.read().expect("cache lock").get(&k) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(y.clone());
        }
        let y = self.model.eval(x)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.scratch.lock().expect("cache lock").insert(k, y.clone());
        Ok(y)
    }
}
