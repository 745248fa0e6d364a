//! Config-driven experiment runner behind the `radis` binary.
//!
//! A config names a target, a seed range and a list of algorithms. Each
//! algorithm carries base parameters and an optional grid of overrides
//! (dotted paths into the parameter table); every grid combination is a
//! cell, and every cell runs once per seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::diagnostics::{config_hash, mae, mean_and_stderr, relative_rmse, relative_rmse_vec, write_metrics_csv, MetricRow};
use crate::emulator::{Emulator, EmulatorSpec};
use crate::error::{Error, Result};
use crate::gp::{fit_gp_with, tune_lengthscale_with, FitOptions, GpKernel};
use crate::nn::build_nn;
use crate::nodes::NodeSet;
use crate::radis::{run_radis, run_radis_lais, LaisSeeding, RadisConfig};
use crate::record::RunRecord;
use crate::rng::Rng;
use crate::support::SupportBox;
use crate::targets::forward::{CachedForward, SyntheticForwardModel};
use crate::targets::inversion::{normalized_mae, sequential_inversion, smooth_truths, InversionProblem, SequentialConfig};
use crate::targets::quadrature::{grid_quadrature, Grid};
use crate::targets::TargetSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    #[serde(default)]
    pub start: u64,
    pub count: usize,
}

impl SeedRange {
    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.start..self.start + self.count as u64
    }

    /// `"N"` (N seeds from 0) or `"A..B"` (half-open).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::arg(format!("seed range `{text}` is not `N` or `A..B`"));
        let range = match text.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if b <= a {
                    return Err(bad());
                }
                SeedRange { start: a, count: (b - a) as usize }
            }
            None => SeedRange { start: 0, count: text.trim().parse().map_err(|_| bad())? },
        };
        if range.count == 0 {
            return Err(bad());
        }
        Ok(range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Radis,
    RadisLais,
    StandardIs,
    Pmc,
    DmPmc,
    OcLais,
    Amis,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    pub name: String,
    pub kind: AlgorithmKind,
    #[serde(default)]
    pub params: toml::Table,
    /// Dotted parameter path to the list of values it takes.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<toml::Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    pub seeds: SeedRange,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record wall time in each run record. Off makes reruns byte-identical.
    #[serde(default = "default_true")]
    pub timing: bool,
    /// Also write the final node set of RADIS runs as CSV.
    #[serde(default)]
    pub save_nodes: bool,
    pub algorithms: Vec<AlgorithmEntry>,
}

fn default_true() -> bool {
    true
}

/// Parameters of a sequential-inversion entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialParams {
    #[serde(flatten)]
    pub sequential: SequentialConfig,
    pub share_nodes: bool,
    #[serde(default = "default_problems")]
    pub problems: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_problems() -> usize {
    16
}

fn default_sigma() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadisLaisParams {
    pub radis: RadisConfig,
    pub lais: LaisSeeding,
}

/// A fully resolved sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Radis(RadisConfig),
    RadisLais(RadisLaisParams),
    Baseline(BaselineConfig),
    Sequential(SequentialParams),
}

impl Sampler {
    fn resolve(kind: AlgorithmKind, params: &toml::Table) -> Result<Self> {
        let value = toml::Value::Table(params.clone());
        let de = |e: toml::de::Error| Error::config(e.message().to_string());
        Ok(match kind {
            AlgorithmKind::Radis => Sampler::Radis(value.try_into().map_err(de)?),
            AlgorithmKind::RadisLais => Sampler::RadisLais(value.try_into().map_err(de)?),
            AlgorithmKind::Sequential => Sampler::Sequential(value.try_into().map_err(de)?),
            other => {
                let tag = match other {
                    AlgorithmKind::StandardIs => "standard-is",
                    AlgorithmKind::Pmc => "pmc",
                    AlgorithmKind::DmPmc => "dm-pmc",
                    AlgorithmKind::OcLais => "oc-lais",
                    _ => "amis",
                };
                let mut t = params.clone();
                t.insert("kind".into(), toml::Value::String(tag.into()));
                Sampler::Baseline(toml::Value::Table(t).try_into().map_err(de)?)
            }
        })
    }

    fn validate(&self, dim: Option<usize>) -> Result<()> {
        match self {
            Sampler::Radis(c) => c.validate(),
            Sampler::RadisLais(p) => {
                p.radis.validate()?;
                if p.lais.chain_length == 0 || !(p.lais.xi > 0.0) {
                    return Err(Error::config("LAIS chain length and scale must be positive"));
                }
                check_dim(dim, p.lais.init_box.dim())
            }
            Sampler::Baseline(b) => {
                if b.budget() == 0 {
                    return Err(Error::config("budget must be at least 1"));
                }
                let box_dim = match b {
                    BaselineConfig::StandardIs { .. } => None,
                    BaselineConfig::Pmc(c) | BaselineConfig::DmPmc(c) => Some(c.init_box.dim()),
                    BaselineConfig::OcLais(c) => Some(c.init_box.dim()),
                    BaselineConfig::Amis(c) => Some(c.init_box.dim()),
                };
                box_dim.map_or(Ok(()), |d| check_dim(dim, d))
            }
            Sampler::Sequential(p) => {
                p.sequential.radis.validate()?;
                if p.problems == 0 || !(p.sigma > 0.0) {
                    return Err(Error::config("sequential runs need problems >= 1 and sigma > 0"));
                }
                Ok(())
            }
        }
    }

    /// Target evaluations a run must spend.
    pub fn budget(&self, dim: usize) -> usize {
        match self {
            Sampler::Radis(c) => c.budget(dim),
            Sampler::RadisLais(p) => p.lais.chain_length + p.radis.budget(dim),
            Sampler::Baseline(b) => b.budget(),
            Sampler::Sequential(p) => p.problems * p.sequential.radis.budget(dim),
        }
    }
}

fn check_dim(target: Option<usize>, got: usize) -> Result<()> {
    match target {
        Some(d) if d != got => Err(Error::DimensionMismatch { expected: d, got }),
        _ => Ok(()),
    }
}

/// One (algorithm, parameter combination).
#[derive(Debug, Clone)]
pub struct Cell {
    pub algorithm: String,
    pub kind: AlgorithmKind,
    pub params: toml::Table,
    pub overrides: BTreeMap<String, toml::Value>,
    pub sampler: Sampler,
    pub hash: String,
}

impl Cell {
    /// `name-hash`, used for file names.
    pub fn id(&self) -> String {
        format!("{}-{}", self.algorithm, self.hash)
    }

    pub fn label(&self) -> String {
        if self.overrides.is_empty() {
            return self.algorithm.clone();
        }
        let parts: Vec<String> = self.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}[{}]", self.algorithm, parts.join(","))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

#[derive(Deserialize)]
struct Anchors {
    #[serde(default)]
    algorithms: Vec<toml::Spanned<toml::Table>>,
}

/// Parse and resolve a config; semantic errors name the line of the
/// offending algorithm entry.
pub fn parse_config(text: &str) -> Result<(ExperimentConfig, Vec<Cell>)> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string().trim_end().to_string()))?;
    let anchors: Anchors = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    let line = |i: usize| anchors.algorithms.get(i).map_or(0, |s| line_of(text, s.span().start));
    let cells = resolve_cells(&cfg).map_err(|(i, e)| Error::config(format!("line {}: algorithm `{}`: {e}", line(i), cfg.algorithms[i].name)))?;
    Ok((cfg, cells))
}

pub fn load_config(path: &Path) -> Result<(ExperimentConfig, Vec<Cell>)> {
    let text = fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::InvalidConfig(m) => Error::config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|p| !p.is_empty()).ok_or_else(|| Error::config(format!("empty grid key `{path}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::config(format!("grid key `{path}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Expand every algorithm's grid. On failure returns the entry index.
pub fn resolve_cells(cfg: &ExperimentConfig) -> std::result::Result<Vec<Cell>, (usize, Error)> {
    if cfg.algorithms.is_empty() {
        return Err((0, Error::config("no algorithms listed")));
    }
    if cfg.seeds.count == 0 {
        return Err((0, Error::config("seed range is empty")));
    }
    let target_dim = match &cfg.target {
        Some(t) => Some(t.build().map_err(|e| (0, e))?.dim()),
        None => None,
    };
    let mut cells = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, entry) in cfg.algorithms.iter().enumerate() {
        if !seen.insert(entry.name.clone()) {
            return Err((i, Error::config("duplicate algorithm name")));
        }
        if entry.kind != AlgorithmKind::Sequential && cfg.target.is_none() {
            return Err((i, Error::config("a target is required for this algorithm")));
        }
        let keys: Vec<&String> = entry.grid.keys().collect();
        if let Some(k) = keys.iter().find(|k| entry.grid[**k].is_empty()) {
            return Err((i, Error::config(format!("grid key `{k}` has no values"))));
        }
        let total: usize = keys.iter().map(|k| entry.grid[*k].len()).product();
        for combo in 0..total {
            let mut rest = combo;
            let mut params = entry.params.clone();
            let mut overrides = BTreeMap::new();
            for k in &keys {
                let vals = &entry.grid[*k];
                let v = vals[rest % vals.len()].clone();
                rest /= vals.len();
                set_path(&mut params, k, v.clone()).map_err(|e| (i, e))?;
                overrides.insert((*k).clone(), v);
            }
            let sampler = Sampler::resolve(entry.kind, &params).map_err(|e| (i, e))?;
            sampler.validate(target_dim).map_err(|e| (i, e))?;
            let hash = config_hash(&(entry.kind, &params)).map_err(|e| (i, e))?;
            cells.push(Cell { algorithm: entry.name.clone(), kind: entry.kind, params, overrides, sampler, hash });
        }
    }
    Ok(cells)
}

/// Result of one (cell, seed).
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub cell: usize,
    pub seed: u64,
    pub result: std::result::Result<RunRecord, String>,
}

/// Run one cell at one seed.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell, seed: u64, nodes_out: Option<&Path>) -> Result<RunRecord> {
    let start = Instant::now();
    let mut rng = Rng::new(seed);
    let echo = serde_json::json!({ "kind": cell.kind, "params": cell.params });
    let record = match &cell.sampler {
        Sampler::Sequential(p) => run_sequential(p, seed, &echo, &mut rng)?,
        sampler => {
            let spec = cfg.target.as_ref().ok_or_else(|| Error::config("missing target"))?;
            let target = spec.build()?;
            let (particles, c_hat) = match sampler {
                Sampler::Radis(c) => {
                    let out = run_radis(&target, c, &mut rng)?;
                    if let Some(path) = nodes_out {
                        out.nodes.save(path)?;
                    }
                    (out.particles.clone(), out.log_c_hat().iter().map(|v| v.exp()).collect())
                }
                Sampler::RadisLais(p) => {
                    let out = run_radis_lais(&target, &p.radis, &p.lais, &mut rng)?;
                    (out.particles.clone(), out.log_c_hat().iter().map(|v| v.exp()).collect())
                }
                Sampler::Baseline(b) => (b.run(&target, &mut rng)?, Vec::new()),
                Sampler::Sequential(_) => unreachable!("handled above"),
            };
            let expected = sampler.budget(target.dim()) as u64;
            if target.evaluations() != expected {
                return Err(Error::config(format!(
                    "run spent {} target evaluations, budget is {expected}",
                    target.evaluations()
                )));
            }
            RunRecord::from_particles(cell.kind_name(), &echo, seed, &particles, c_hat, target.evaluations())?
        }
    };
    let wall = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    Ok(record.with_wall_time(wall))
}

impl Cell {
    fn kind_name(&self) -> String {
        self.algorithm.clone()
    }
}

fn run_sequential(p: &SequentialParams, seed: u64, echo: &serde_json::Value, rng: &mut Rng) -> Result<RunRecord> {
    let model = SyntheticForwardModel::new();
    let prior = model.prior().clone();
    let forward = Arc::new(CachedForward::new(Arc::new(model)));
    let truths = smooth_truths(&prior, p.problems, rng);
    let problems = truths
        .iter()
        .map(|x| InversionProblem::simulate(forward.clone(), x, p.sigma, prior.clone(), rng))
        .collect::<Result<Vec<_>>>()?;
    let mut solve_rng = rng.split();
    let results = sequential_inversion(&problems, &p.sequential, p.share_nodes, &mut solve_rng)?;
    let errors: Vec<f64> = results.iter().zip(&truths).map(|(r, t)| normalized_mae(&prior, &r.map, t)).collect();
    let n = results.len() as f64;
    let evaluations: u64 = results.iter().map(|r| r.record.evaluations).sum();
    let expected = (p.problems * p.sequential.radis.budget(prior.dim())) as u64;
    if evaluations != expected {
        return Err(Error::config(format!("run spent {evaluations} target evaluations, budget is {expected}")));
    }
    let mut record = RunRecord {
        algorithm: if p.share_nodes { "sequential-shared".into() } else { "sequential".into() },
        config: echo.clone(),
        seed,
        evidence: results.iter().map(|r| r.record.evidence).sum::<f64>() / n,
        mean: Vec::new(),
        ess: results.iter().map(|r| r.record.ess).sum::<f64>() / n,
        c_hat: Vec::new(),
        evaluations,
        wall_time_s: 0.0,
        extra: BTreeMap::new(),
    };
    record.extra.insert("map_mae".into(), errors.iter().sum::<f64>() / n);
    record.extra.insert("forward_evaluations".into(), results.iter().map(|r| r.forward_evaluations).sum::<u64>() as f64);
    Ok(record)
}

/// Aggregate the seeds of one cell into metric rows. The first row is the
/// cell's headline metric (evidence error when the truth is known, MAP error
/// for sequential inversion, ESS otherwise) and goes to `metrics.csv`.
pub fn cell_metrics(cfg: &ExperimentConfig, cell: &Cell, outcomes: &[&RunOutcome]) -> Vec<MetricRow> {
    let ok: Vec<&RunRecord> = outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect();
    let failures = outcomes.len() - ok.len();
    let label = cell.label();
    let row = |metric: &str, value: f64, se: f64| MetricRow {
        metric: metric.into(),
        algorithm: label.clone(),
        config_hash: cell.hash.clone(),
        seed_count: ok.len(),
        value,
        std_error: se,
        failures,
    };
    let mut rows = Vec::new();
    if ok.is_empty() {
        rows.push(row("runs", f64::NAN, f64::NAN));
        return rows;
    }
    let stat = |vals: &[f64]| mean_and_stderr(vals).unwrap_or((f64::NAN, f64::NAN));
    if cell.kind == AlgorithmKind::Sequential {
        for key in ["map_mae", "forward_evaluations"] {
            let vals: Vec<f64> = ok.iter().filter_map(|r| r.extra.get(key).copied()).collect();
            let (m, se) = stat(&vals);
            rows.push(row(key, m, se));
        }
    } else if let Some((z, mu)) = cfg.target.as_ref().and_then(TargetSpec::truth) {
        let zs: Vec<f64> = ok.iter().map(|r| r.evidence).collect();
        if let Ok(v) = relative_rmse(&zs, z) {
            let sq: Vec<f64> = zs.iter().map(|e| ((e - z) / z).powi(2)).collect();
            let se = if v > 0.0 { stat(&sq).1 / (2.0 * v) } else { 0.0 };
            rows.push(row("rel_rmse_z", v, se));
        }
        if let Ok(v) = mae(&zs, z) {
            let abs: Vec<f64> = zs.iter().map(|e| (e - z).abs()).collect();
            rows.push(row("mae_z", v, stat(&abs).1));
        }
        let means: Vec<Vec<f64>> = ok.iter().filter(|r| r.mean.len() == mu.len()).map(|r| r.mean.clone()).collect();
        if let Ok(v) = relative_rmse_vec(&means, &mu) {
            rows.push(row("rel_rmse_mean", v, f64::NAN));
        }
    }
    let ess: Vec<f64> = ok.iter().map(|r| r.ess).collect();
    let (m, se) = stat(&ess);
    rows.push(row("ess", m, se));
    let evals: Vec<f64> = ok.iter().map(|r| r.evaluations as f64).collect();
    rows.push(row("evaluations", stat(&evals).0, 0.0));
    rows
}

/// Summary of a finished experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub output: PathBuf,
    pub rows: Vec<MetricRow>,
    pub runs: usize,
    pub failures: usize,
}

/// Run every cell for every seed on `jobs` threads (all cores if `None`)
/// and write `runs/<cell>/seed_<n>.json`, `metrics.csv` (one row per cell)
/// and `metrics_all.csv` (every metric) under `output`.
pub fn run_experiment(cfg: &ExperimentConfig, cells: &[Cell], output: &Path, jobs: Option<usize>) -> Result<ExperimentSummary> {
    fs::create_dir_all(output.join("runs"))?;
    for c in cells {
        fs::create_dir_all(output.join("runs").join(c.id()))?;
    }
    let tasks: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| cfg.seeds.seeds().map(move |s| (c, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, seed)| {
                let dir = output.join("runs").join(cells[c].id());
                let nodes_path = dir.join(format!("seed_{seed}_nodes.csv"));
                let nodes = (cfg.save_nodes && matches!(cells[c].sampler, Sampler::Radis(_))).then_some(nodes_path.as_path());
                let result = run_cell(cfg, &cells[c], seed, nodes).and_then(|rec| {
                    let text = serde_json::to_string_pretty(&rec)?;
                    fs::write(dir.join(format!("seed_{seed}.json")), text + "\n")?;
                    Ok(rec)
                });
                if let Err(e) = &result {
                    log::warn!("{} seed {seed} failed: {e}", cells[c].label());
                }
                RunOutcome { cell: c, seed, result: result.map_err(|e| e.to_string()) }
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut primary = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let mine: Vec<&RunOutcome> = outcomes.iter().filter(|o| o.cell == c).collect();
        let cell_rows = cell_metrics(cfg, cell, &mine);
        primary.push(cell_rows[0].clone());
        rows.extend(cell_rows);
    }
    write_metrics_csv(&primary, fs::File::create(output.join("metrics.csv"))?)?;
    write_metrics_csv(&rows, fs::File::create(output.join("metrics_all.csv"))?)?;
    let failures = outcomes.iter().filter(|o| o.result.is_err()).count();
    if failures > 0 {
        let lines: Vec<String> = outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(|e| format!("{},{},{:?}", cells[o.cell].id(), o.seed, e)))
            .collect();
        fs::write(output.join("failures.csv"), format!("cell,seed,error\n{}\n", lines.join("\n")))?;
    }
    Ok(ExperimentSummary { output: output.to_path_buf(), rows, runs: outcomes.len(), failures })
}

/// Plain-text table of the aggregated metrics.
pub fn format_summary(rows: &[MetricRow]) -> String {
    let w = rows.iter().map(|r| r.algorithm.len()).max().unwrap_or(9).max(9);
    let mut s = format!("{:<w$}  {:<16} {:>14} {:>12} {:>6} {:>5}\n", "algorithm", "metric", "value", "std_error", "seeds", "fail");
    for r in rows {
        s.push_str(&format!(
            "{:<w$}  {:<16} {:>14.6e} {:>12.3e} {:>6} {:>5}\n",
            r.algorithm, r.metric, r.value, r.std_error, r.seed_count, r.failures
        ));
    }
    s
}

/// `[grid]` section of an emulate config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        if self.counts.is_empty() {
            return Err(Error::config("grid spec has no axes"));
        }
        if self.counts.iter().any(|c| *c == 0) {
            return Err(Error::config("grid spec has an empty axis"));
        }
        Grid::new(SupportBox::new(self.lower.clone(), self.upper.clone())?, &self.counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmulateConfig {
    /// Node CSV (`x_1..x_d,log_pi`), relative to the config file.
    pub nodes: PathBuf,
    pub emulator: EmulatorSpec,
    pub grid: GridSpec,
    /// Emulator support; defaults to the grid box.
    #[serde(default)]
    pub support: Option<SupportBox>,
    /// Optional reference target; adds a `pi` column and the grid L2 distance.
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmulateSummary {
    pub output: PathBuf,
    pub points: usize,
    pub l2_distance: Option<f64>,
}

/// Build an emulator from saved nodes and dump it on a grid.
pub fn emulate(config_path: &Path, out: Option<&Path>) -> Result<EmulateSummary> {
    let text = fs::read_to_string(config_path)?;
    let cfg: EmulateConfig = toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", config_path.display())))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let nodes = NodeSet::load(base.join(&cfg.nodes))?;
    let grid = cfg.grid.build()?;
    let support = cfg.support.clone().unwrap_or_else(|| grid.support().clone());
    let em = build_emulator(&cfg.emulator, nodes, support)?;
    let target = cfg.target.as_ref().map(TargetSpec::build).transpose()?;
    let output = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.as_ref().map(|p| base.join(p)))
        .unwrap_or_else(|| base.join("emulator.csv"));
    if let Some(dir) = output.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(&output)?;
    let d = grid.dim();
    let mut header: Vec<String> = (1..=d).map(|k| format!("x_{k}")).collect();
    header.push("emulator".into());
    if target.is_some() {
        header.push("pi".into());
    }
    w.write_record(&header)?;
    let values = grid.map(|x| em.log_eval(x).exp());
    for (i, v) in values.iter().enumerate() {
        let mut rec: Vec<String> = grid.point(i).iter().map(|c| format!("{c:?}")).collect();
        rec.push(format!("{v:?}"));
        if let Some(t) = &target {
            rec.push(format!("{:?}", t.log_pi_uncounted(&grid.point(i)).exp()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let l2_distance = target.as_ref().map(|t| {
        crate::diagnostics::l2_distance_grid(|x| em.log_eval(x).exp(), |x| t.log_pi_uncounted(x).exp(), &grid)
    });
    Ok(EmulateSummary { output, points: grid.len(), l2_distance })
}

fn build_emulator(spec: &EmulatorSpec, nodes: NodeSet, support: SupportBox) -> Result<Box<dyn Emulator>> {
    if nodes.dim() != support.dim() {
        return Err(Error::DimensionMismatch { expected: support.dim(), got: nodes.dim() });
    }
    Ok(match spec {
        EmulatorSpec::Nn { k } => Box::new(build_nn(nodes, *k, support)?),
        EmulatorSpec::Gp(gp) => {
            let opts = FitOptions { constant_mean: gp.constant_mean, floor_gap: Some(gp.floor_gap) };
            let eps = match gp.lengthscale {
                Some(e) => e,
                None if nodes.len() >= 2 => tune_lengthscale_with(&nodes, gp.noise, &gp.grid_for(support.diagonal()), opts)?,
                None => 0.1 * support.diagonal(),
            };
            Box::new(fit_gp_with(nodes, GpKernel::new(eps, gp.noise)?, opts)?.truncated(support))
        }
    })
}

/// Ground truth of a named target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub target: String,
    pub z: f64,
    pub mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    /// `"grid"` or `"closed-form"`.
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

pub fn oracle(name: &str, per_axis: usize) -> Result<OracleReport> {
    match name {
        "banana" => {
            let t = crate::targets::banana_target(&Default::default())?;
            let q = grid_quadrature(&t, &vec![per_axis; t.dim()])?;
            Ok(OracleReport {
                target: name.into(),
                z: q.z,
                mean: q.mean,
                covariance: Some(q.covariance),
                method: "grid".into(),
                grid_points: Some(q.grid.len()),
            })
        }
        "mixture" => Ok(OracleReport {
            target: name.into(),
            z: 1.0,
            mean: crate::targets::mixture::mixture_mean(10),
            covariance: None,
            method: "closed-form".into(),
            grid_points: None,
        }),
        other => Err(Error::arg(format!("unknown target `{other}` (expected banana or mixture)"))),
    }
}
