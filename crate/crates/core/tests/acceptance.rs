//! Acceptance gate: runs every criterion and prints one PASS/FAIL line each.
//! Exits non-zero when any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use radis_core::baselines::{amis, oc_lais, standard_is, AmisConfig, LaisConfig};
use radis_core::baselines::{dm_pmc, pmc, PmcConfig};
use radis_core::diagnostics::{chi2_divergence_grid, holder_bounds, l2_distance_grid, mae, median, relative_rmse, relative_rmse_vec};
use radis_core::emulator::EmulatorSpec;
use radis_core::gp::{fit_gp, GpKernel, GpSpec};
use radis_core::inner::{inner_log_weights, sir_bias_probe, AnalyticTarget1d};
use radis_core::nn::{build_nn, nn_mixture_decomposition_1d};
use radis_core::radis::{
    run_deep_radis, run_radis, run_radis_lais, AlphaSchedule, LaisSeeding, LayerConfig, RadisConfig, RadisOutput,
};
use radis_core::targets::banana::{banana_target, BananaParams, BANANA_MEAN, BANANA_Z};
use radis_core::targets::forward::{CachedForward, SyntheticForwardModel};
use radis_core::targets::inversion::{normalized_mae, sequential_inversion, smooth_truths, InversionProblem, SequentialConfig};
use radis_core::targets::mixture::mixture_target;
use radis_core::targets::quadrature::{grid_quadrature, Grid};
use radis_core::weights::normalize_log_weights;
use radis_core::{Density, Emulator, NodeSet, Proposal, ProposalSpec, Rng, SupportBox, TargetDensity};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn banana() -> TargetDensity {
    banana_target(&BananaParams::default()).unwrap()
}

fn banana_box() -> SupportBox {
    BananaParams::default().domain().unwrap()
}

fn uniform_spec() -> ProposalSpec {
    ProposalSpec::Uniform { lower: vec![-10.0, -10.0], upper: vec![10.0, 10.0] }
}

fn nn_ais() -> RadisConfig {
    RadisConfig::nn(100, 10, 1000, 10)
}

fn nn_ais_u() -> RadisConfig {
    nn_ais().with_parametric(uniform_spec(), AlphaSchedule::Fixed { value: 0.5 })
}

fn c1_oracle() -> Outcome {
    let start = Instant::now();
    let q = grid_quadrature(&banana(), &[2000, 2000]).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let z_ok = (q.z / BANANA_Z - 1.0).abs() <= 1e-3;
    let mu_ok = q.mean.iter().zip(BANANA_MEAN.iter()).all(|(a, b)| (a - b).abs() <= 1e-3);
    outcome(
        z_ok && mu_ok && secs < 60.0,
        format!("Z = {:.5} (ref {BANANA_Z}), mean = {}, {secs:.1} s", q.z, fmt_vec(&q.mean)),
    )
}

/// Evidence and mean estimates of every banana method at E = 1010, plus the
/// NN-AIS+U node sets for the emulator comparison.
struct BananaRuns {
    z: Vec<Vec<f64>>,
    mean: Vec<Vec<Vec<f64>>>,
    sticky_nodes: Vec<NodeSet>,
    secs: f64,
}

const BANANA_METHODS: [&str; 5] = ["NN-AIS", "NN-AIS+U", "IS-U", "IS-G*", "IS-G*+U"];
const BANANA_SEEDS: u64 = 200;

fn banana_runs() -> BananaRuns {
    let start = Instant::now();
    let base = banana();
    let u = Density::uniform(banana_box());
    let g = radis_core::targets::banana::banana_moment_gaussian();
    let gu = Density::equal_mixture(vec![g.clone(), u.clone()]).unwrap();
    let per_seed: Vec<(Vec<(f64, Vec<f64>)>, NodeSet)> = (0..BANANA_SEEDS)
        .into_par_iter()
        .map(|seed| {
            let mut rng = Rng::new(seed);
            let mut row = Vec::new();
            let a = run_radis(&base.fresh(), &nn_ais(), &mut rng).unwrap();
            row.push((a.evidence, a.particles.mean().unwrap()));
            let b = run_radis(&base.fresh(), &nn_ais_u(), &mut rng).unwrap();
            row.push((b.evidence, b.particles.mean().unwrap()));
            for q in [&u, &g, &gu] {
                let p = standard_is(&base.fresh(), q, 1010, &mut rng).unwrap();
                row.push((p.evidence(), p.mean().unwrap()));
            }
            (row, b.nodes)
        })
        .collect();
    let mut z = vec![Vec::new(); BANANA_METHODS.len()];
    let mut mean = vec![Vec::new(); BANANA_METHODS.len()];
    let mut sticky_nodes = Vec::new();
    for (row, nodes) in per_seed {
        for (m, (zz, mu)) in row.into_iter().enumerate() {
            z[m].push(zz);
            mean[m].push(mu);
        }
        sticky_nodes.push(nodes);
    }
    BananaRuns { z, mean, sticky_nodes, secs: start.elapsed().as_secs_f64() }
}

fn c2_ordering(runs: &BananaRuns) -> Outcome {
    let rz: Vec<f64> = runs.z.iter().map(|z| relative_rmse(z, BANANA_Z).unwrap()).collect();
    let rmu: Vec<f64> = runs.mean.iter().map(|m| relative_rmse_vec(m, &BANANA_MEAN).unwrap()).collect();
    let pass = (0..2).all(|a| (2..5).all(|b| rz[a] < rz[b] && rmu[a] < rmu[b])) && runs.secs < 600.0;
    let cells: Vec<String> = BANANA_METHODS
        .iter()
        .enumerate()
        .map(|(i, n)| format!("{n} {:.4}/{:.4}", rz[i], rmu[i]))
        .collect();
    outcome(pass, format!("rel. RMSE Z/mu over {BANANA_SEEDS} seeds: {}; {:.1} s", cells.join(", "), runs.secs))
}

fn c3_budget_gap(runs: &BananaRuns) -> Outcome {
    let start = Instant::now();
    let target_rmse = relative_rmse(&runs.z[0], BANANA_Z).unwrap();
    let base = banana();
    let u = Density::uniform(banana_box());
    let isu_rmse = |factor: usize| {
        let zs: Vec<f64> = (0..BANANA_SEEDS)
            .into_par_iter()
            .map(|seed| {
                let mut rng = Rng::with_stream(seed, 3);
                standard_is(&base.fresh(), &u, 1010 * factor, &mut rng).unwrap().evidence()
            })
            .collect();
        relative_rmse(&zs, BANANA_Z).unwrap()
    };
    let at_ten = isu_rmse(10);
    let mut matched = None;
    for factor in [20, 40, 80] {
        if isu_rmse(factor) <= target_rmse {
            matched = Some(factor);
            break;
        }
    }
    let secs = start.elapsed().as_secs_f64() + runs.secs;
    let reach = match matched {
        Some(f) => format!("IS-U first matches at {f}x"),
        None => "IS-U still worse at 80x".into(),
    };
    outcome(
        at_ten > target_rmse && secs < 600.0,
        format!("NN-AIS rel. RMSE Z {target_rmse:.4} at E=1010; IS-U {at_ten:.4} at E=10100; {reach}; {secs:.1} s"),
    )
}

fn c4_emulator(runs: &BananaRuns) -> Outcome {
    let seeds = 100;
    let base = banana();
    let support = banana_box();
    let grid = Grid::uniform(support.clone(), 200).unwrap();
    let pi = |x: &[f64]| base.log_pi_uncounted(x).exp();
    let pairs: Vec<(f64, f64)> = runs.sticky_nodes[..seeds]
        .par_iter()
        .enumerate()
        .map(|(seed, nodes)| {
            let sticky = build_nn(nodes.clone(), 1, support.clone()).unwrap();
            let mut rng = Rng::with_stream(seed as u64, 4);
            let pts: Vec<Vec<f64>> = (0..nodes.len()).map(|_| support.sample_uniform(&mut rng)).collect();
            let logs: Vec<f64> = pts.iter().map(|x| base.log_pi_uncounted(x)).collect();
            let unif = build_nn(NodeSet::from_points(2, &pts, &logs, 0.0).unwrap(), 1, support.clone()).unwrap();
            (l2_distance_grid(|x| sticky.eval(x), pi, &grid), l2_distance_grid(|x| unif.eval(x), pi, &grid))
        })
        .collect();
    let s: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let u: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ms, mu) = (median(&s).unwrap(), median(&u).unwrap());
    let wins = pairs.iter().filter(|p| p.0 < p.1).count();
    outcome(
        ms < mu,
        format!("median grid L2 at t=100 over {seeds} seeds: NN-AIS+U nodes {ms:.4}, uniform nodes {mu:.4} (adaptive better in {wins}/{seeds})"),
    )
}

fn mixture_box() -> SupportBox {
    SupportBox::cube(10, -15.0, 15.0).unwrap()
}

fn c5_multimodal() -> Outcome {
    let start = Instant::now();
    let seeds = 200u64;
    let base = mixture_target(10);
    let mae_of = |zs: Vec<f64>| mae(&zs, 1.0).unwrap();
    let mut amis_cells = Vec::new();
    for m in [10, 100, 200, 500] {
        for xi in 1..=6 {
            let cfg = AmisConfig { per_iteration: m, xi: xi as f64, budget: 1000, init_box: mixture_box(), adapt_covariance: true };
            let zs = (0..seeds)
                .into_par_iter()
                .map(|s| amis(&base.fresh(), &cfg, &mut Rng::with_stream(s, 5)).unwrap().evidence())
                .collect();
            amis_cells.push((m, xi, mae_of(zs)));
        }
    }
    let failing: Vec<String> = amis_cells
        .iter()
        .filter(|c| c.2 < 0.99)
        .map(|c| format!("M={} xi={}: {:.4}", c.0, c.1, c.2))
        .collect();
    let amis_min = amis_cells.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    let mut b_pass = true;
    for xi in 1..=6 {
        let lais = LaisConfig { chain_length: 500, xi: xi as f64, budget: 1000, init_box: mixture_box() };
        let oc = mae_of(
            (0..seeds)
                .into_par_iter()
                .map(|s| oc_lais(&base.fresh(), &lais, &mut Rng::with_stream(s, 6)).unwrap().evidence())
                .collect(),
        );
        let seeding = LaisSeeding { chain_length: 500, xi: xi as f64, init_box: mixture_box() };
        let mut cfg = RadisConfig::nn(5, 100, 2000, 0);
        cfg.alpha = AlphaSchedule::Fixed { value: 0.5 };
        let nn = mae_of(
            (0..seeds)
                .into_par_iter()
                .map(|s| run_radis_lais(&base.fresh(), &cfg, &seeding, &mut Rng::with_stream(s, 7)).unwrap().evidence)
                .collect(),
        );
        let ok = if xi <= 2 { nn < oc } else { nn <= 1.5 * oc };
        b_pass &= ok;
        rows.push(format!("xi={xi} {nn:.4} vs {oc:.4}"));
    }
    let secs = start.elapsed().as_secs_f64();
    let a_detail = if failing.is_empty() {
        format!("(a) AMIS min MAE {amis_min:.4} over 24 cells")
    } else {
        format!("(a) AMIS below 0.99 in {}/24 cells: {}", failing.len(), failing.join("; "))
    };
    outcome(
        failing.is_empty() && b_pass && secs < 1800.0,
        format!("{a_detail}; (b) NN-AIS+LAIS vs OC-LAIS MAE(Z), N_LAIS=500: {}; {seeds} seeds, {secs:.1} s", rows.join(", ")),
    )
}

struct Check {
    name: &'static str,
    pass: bool,
    note: String,
}

fn check_interpolation() -> Check {
    let t = banana();
    let support = banana_box();
    let mut rng = Rng::new(11);
    let pts: Vec<Vec<f64>> = (0..30).map(|_| support.sample_uniform(&mut rng)).collect();
    let logs: Vec<f64> = pts.iter().map(|x| t.log_pi_uncounted(x)).collect();
    let nodes = NodeSet::from_points(2, &pts, &logs, 0.0).unwrap();
    let nn = build_nn(nodes.clone(), 1, support).unwrap();
    let nn_exact = pts.iter().zip(&logs).all(|(x, l)| nn.log_eval(x) == *l);
    let gp = fit_gp(nodes, GpKernel::new(1.0, 0.0).unwrap()).unwrap();
    let gp_err = pts.iter().zip(&logs).map(|(x, l)| (gp.predict_log(x) - l).abs()).fold(0.0, f64::max);
    Check {
        name: "interpolation",
        pass: nn_exact && gp_err < 1e-6,
        note: format!("NN exact {nn_exact}, GP max error {gp_err:.1e}"),
    }
}

fn check_resample_probability() -> Check {
    let support = SupportBox::cube(1, 0.0, 10.0).unwrap();
    let xs = [0.7, 2.0, 3.1, 5.5, 8.0, 9.6];
    let vals = [0.2, 1.5, 3.0, 0.7, 2.2, 0.4];
    let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let logs: Vec<f64> = vals.iter().map(|v: &f64| v.ln()).collect();
    let em = build_nn(NodeSet::from_points(1, &pts, &logs, 0.0).unwrap(), 1, support.clone()).unwrap();
    let cells = nn_mixture_decomposition_1d(&em).unwrap();
    let q = Density::uniform(support);
    let mut rng = Rng::new(12);
    let pool: Vec<Vec<f64>> = (0..1_000_000).map(|_| q.sample(&mut rng)).collect();
    let w = normalize_log_weights(&inner_log_weights(&em, &q, &pool).unwrap()).unwrap();
    let mut mass = vec![0.0; xs.len()];
    for (z, wi) in pool.iter().zip(&w) {
        mass[em.nodes().nearest(z).unwrap().index] += wi;
    }
    let tv = 0.5 * cells.iter().map(|c| (mass[c.node] - c.mass).abs()).sum::<f64>();
    Check { name: "resample probabilities", pass: tv < 0.01, note: format!("TV {tv:.2e} at L=1e6") }
}

fn check_sir_ks() -> Check {
    let target = AnalyticTarget1d::Gaussian { mean: 0.0, std: 1.0 };
    let aux = Density::gaussian_isotropic(vec![0.5], 2.0).unwrap();
    let sizes = [100, 1_000, 10_000, 100_000];
    let seeds = 20;
    let runs: Vec<Vec<(usize, f64)>> = (0..seeds)
        .into_par_iter()
        .map(|s| sir_bias_probe(&target, &aux, &sizes, 100_000, &mut Rng::new(100 + s)).unwrap())
        .collect();
    let means: Vec<f64> = (0..sizes.len()).map(|i| runs.iter().map(|r| r[i].1).sum::<f64>() / seeds as f64).collect();
    let monotone = means.windows(2).all(|w| w[1] < w[0]);
    Check { name: "SIR KS decrease", pass: monotone, note: format!("mean KS {}", fmt_vec(&means)) }
}

/// `int N(x;0,1)^2 / N(x;mu,s^2) dx - 1`, valid for `s^2 > 1/2`.
fn chi2_gaussian_1d(mu: f64, s: f64) -> f64 {
    let a = 1.0 - 1.0 / (2.0 * s * s);
    let b = mu / (s * s);
    let c = mu * mu / (2.0 * s * s);
    s / (2.0 * a).sqrt() * (b * b / (4.0 * a) + c).exp() - 1.0
}

fn check_weight_variance() -> Check {
    let z = 3.0;
    let cases: [(Vec<f64>, f64); 4] = [(vec![0.5], 1.5), (vec![1.0], 2.0), (vec![-0.3], 1.2), (vec![0.5, -0.5], 1.5)];
    let mut worst: f64 = 0.0;
    let mut grid_worst: f64 = 0.0;
    for (k, (mu, s)) in cases.iter().enumerate() {
        let d = mu.len();
        let exact = mu.iter().map(|m| 1.0 + chi2_gaussian_1d(*m, *s)).product::<f64>() - 1.0;
        let p = Density::gaussian_isotropic(vec![0.0; d], 1.0).unwrap();
        let q = Density::gaussian_isotropic(mu.clone(), *s).unwrap();
        let grid = Grid::uniform(SupportBox::cube(d, -14.0, 14.0).unwrap(), if d == 1 { 20_000 } else { 600 }).unwrap();
        let on_grid = chi2_divergence_grid(|x| p.log_density(x).exp(), |x| q.log_density(x).exp(), &grid);
        grid_worst = grid_worst.max((on_grid / exact - 1.0).abs());
        let n = 4_000_000;
        let mut rng = Rng::new(200 + k as u64);
        let w: Vec<f64> = (0..n)
            .map(|_| {
                let x = q.sample(&mut rng);
                z * (p.log_density(&x) - q.log_density(&x)).exp()
            })
            .collect();
        let m = w.iter().sum::<f64>() / n as f64;
        let var = w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        worst = worst.max((var / (z * z * exact) - 1.0).abs());
    }
    Check {
        name: "weight variance = Z^2 chi2",
        pass: worst < 0.05 && grid_worst < 1e-4,
        note: format!("max relative gap {worst:.3}, grid chi2 vs closed form {grid_worst:.1e}"),
    }
}

fn check_single_iteration_weights() -> Check {
    let t = banana();
    let mut worst: f64 = 0.0;
    for (k, cfg) in [RadisConfig::nn(1, 50, 1000, 10), RadisConfig::nn(1, 50, 1000, 10).with_parametric(uniform_spec(), AlphaSchedule::Fixed { value: 0.5 })]
        .iter()
        .enumerate()
    {
        let out = run_radis(&t.fresh(), cfg, &mut Rng::new(300 + k as u64)).unwrap();
        let term = &out.trace.terms[0];
        let c = term.log_c_hat.exp();
        for p in out.particles.particles() {
            let emu = term.emulator.eval(&p.x) / c;
            let par = out.parametric.as_ref().map_or(0.0, |q| q.log_density(&p.x).exp());
            let denom = term.alpha * par + (1.0 - term.alpha) * emu;
            let direct = p.log_target.exp() / denom;
            worst = worst.max((p.weight() - direct).abs() / direct.max(1e-300));
        }
    }
    Check { name: "T=1 weight reduction", pass: worst < 1e-10, note: format!("max relative gap {worst:.1e}") }
}

fn gp_layer(batch: usize) -> LayerConfig {
    LayerConfig { emulator: EmulatorSpec::Gp(GpSpec::default()), batch_size: batch }
}

fn check_budgets() -> Check {
    let b = banana();
    let mixture = mixture_target(10);
    let mut failures = Vec::new();
    let mut count = 0;
    let mut expect = |name: &str, spent: u64, want: u64| {
        count += 1;
        if spent != want {
            failures.push(format!("{name} spent {spent}, budget {want}"));
        }
    };
    let mut rng = Rng::new(400);
    let radis_cases: Vec<(&str, RadisConfig)> = vec![
        ("radis-nn", RadisConfig::nn(6, 15, 500, 12)),
        ("radis-nn+par", RadisConfig::nn(6, 15, 500, 12).with_parametric(uniform_spec(), AlphaSchedule::default())),
        ("radis-gp", {
            let mut c = RadisConfig::nn(4, 10, 300, 15);
            c.layers = vec![gp_layer(300)];
            c
        }),
        ("radis-deep", {
            let mut c = RadisConfig::nn(5, 10, 400, 12);
            c.layers.push(LayerConfig { emulator: EmulatorSpec::nn(1), batch_size: 100 });
            c
        }),
    ];
    for (name, cfg) in radis_cases {
        let t = b.fresh();
        let out = run_radis(&t, &cfg, &mut rng).unwrap();
        expect(name, t.evaluations(), cfg.budget(2) as u64);
        expect(&format!("{name} (reported)"), out.evaluations, cfg.budget(2) as u64);
    }
    let t = mixture.fresh();
    let seeding = LaisSeeding { chain_length: 100, xi: 3.0, init_box: mixture_box() };
    let cfg = RadisConfig::nn(3, 50, 500, 0);
    run_radis_lais(&t, &cfg, &seeding, &mut rng).unwrap();
    expect("radis-lais", t.evaluations(), 100 + cfg.budget(10) as u64);
    let t = b.fresh();
    standard_is(&t, &Density::uniform(banana_box()), 777, &mut rng).unwrap();
    expect("standard-is", t.evaluations(), 777);
    let pcfg = PmcConfig { proposals: 20, xi: 2.0, budget: 200, init_box: mixture_box() };
    let t = mixture.fresh();
    pmc(&t, &pcfg, &mut rng).unwrap();
    expect("pmc", t.evaluations(), 200);
    let t = mixture.fresh();
    dm_pmc(&t, &pcfg, &mut rng).unwrap();
    expect("dm-pmc", t.evaluations(), 200);
    let t = mixture.fresh();
    oc_lais(&t, &LaisConfig { chain_length: 60, xi: 2.0, budget: 300, init_box: mixture_box() }, &mut rng).unwrap();
    expect("oc-lais", t.evaluations(), 300);
    for adapt in [false, true] {
        let t = mixture.fresh();
        let cfg = AmisConfig { per_iteration: 25, xi: 3.0, budget: 250, init_box: mixture_box(), adapt_covariance: adapt };
        amis(&t, &cfg, &mut rng).unwrap();
        expect("amis", t.evaluations(), 250);
    }
    let (problems, _, _) = inversion_set(6, 0.05, &mut Rng::new(401));
    let cfg = SequentialConfig { radis: RadisConfig::nn(4, 10, 400, 30), share_count: 4 };
    let mut per_mode = Vec::new();
    for share in [false, true] {
        let res = sequential_inversion(&problems, &cfg, share, &mut Rng::new(402)).unwrap();
        let spent: u64 = res.iter().map(|r| r.record.evaluations).sum();
        expect("sequential", spent, 6 * cfg.radis.budget(6) as u64);
        per_mode.push(res.iter().map(|r| r.forward_evaluations).sum::<u64>());
    }
    if per_mode[1] >= per_mode[0] {
        failures.push(format!("shared forward evaluations {} not below {}", per_mode[1], per_mode[0]));
    }
    Check {
        name: "budget ledger",
        pass: failures.is_empty(),
        note: if failures.is_empty() { format!("{count} ledgers exact") } else { failures.join("; ") },
    }
}

fn check_deep_single_layer() -> Check {
    let t = banana();
    let cfg = nn_ais_u();
    let a: RadisOutput = run_radis(&t.fresh(), &cfg, &mut Rng::new(500)).unwrap();
    let b = run_deep_radis(&t.fresh(), &cfg, &mut Rng::new(500)).unwrap();
    let same = a.evidence.to_bits() == b.evidence.to_bits()
        && a.particles.len() == b.particles.len()
        && a.particles.particles().iter().zip(b.particles.particles()).all(|(p, q)| {
            p.log_weight.to_bits() == q.log_weight.to_bits() && p.x.iter().zip(&q.x).all(|(u, v)| u.to_bits() == v.to_bits())
        });
    Check { name: "deep D=1 identity", pass: same, note: format!("{} particles compared bitwise", a.particles.len()) }
}

fn check_holder() -> Check {
    let mut all = true;
    let mut n = 0;
    let grid1 = Grid::uniform(SupportBox::cube(1, -15.0, 15.0).unwrap(), 20_000).unwrap();
    let pairs_1d: Vec<(Density, Density)> = vec![
        (Density::gaussian_isotropic(vec![0.0], 1.0).unwrap(), Density::gaussian_isotropic(vec![0.5], 1.5).unwrap()),
        (Density::gaussian_isotropic(vec![1.0], 0.7).unwrap(), Density::gaussian_isotropic(vec![0.0], 3.0).unwrap()),
        (
            Density::equal_mixture(vec![
                Density::gaussian_isotropic(vec![-2.0], 0.8).unwrap(),
                Density::gaussian_isotropic(vec![2.5], 1.0).unwrap(),
            ])
            .unwrap(),
            Density::student_t(vec![0.0], nalgebra::DMatrix::from_element(1, 1, 4.0), 3.0).unwrap(),
        ),
    ];
    for (p, q) in &pairs_1d {
        n += 1;
        all &= holder_bounds(|x| p.log_density(x).exp(), |x| q.log_density(x).exp(), &grid1).holds();
    }
    let bt = banana();
    let grid2 = Grid::uniform(banana_box(), 400).unwrap();
    let z = grid_quadrature(&bt, &[400, 400]).unwrap().z;
    let pbar = |x: &[f64]| bt.log_pi_uncounted(x).exp() / z;
    let u = Density::uniform(banana_box());
    let g = radis_core::targets::banana::banana_moment_gaussian();
    for q in [&u, &g] {
        n += 1;
        all &= holder_bounds(pbar, |x| q.log_density(x).exp(), &grid2).holds();
    }
    Check { name: "Holder chain", pass: all, note: format!("{n} density pairs") }
}

fn c6_properties() -> Outcome {
    let checks = [
        check_interpolation(),
        check_resample_probability(),
        check_sir_ks(),
        check_weight_variance(),
        check_single_iteration_weights(),
        check_budgets(),
        check_deep_single_layer(),
        check_holder(),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let notes: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {} ({})", c.name, if c.pass { "ok" } else { "FAILED" }, c.note))
        .collect();
    outcome(pass, notes.join("; "))
}

fn inversion_set(count: usize, sigma: f64, rng: &mut Rng) -> (Vec<InversionProblem>, Vec<Vec<f64>>, Arc<CachedForward>) {
    let model = SyntheticForwardModel::new();
    let prior = model.prior().clone();
    let forward = Arc::new(CachedForward::new(Arc::new(model)));
    let truths = smooth_truths(&prior, count, rng);
    let problems = truths
        .iter()
        .map(|x| InversionProblem::simulate(forward.clone(), x, sigma, prior.clone(), rng).unwrap())
        .collect();
    (problems, truths, forward)
}

fn c7_sequential() -> Outcome {
    let start = Instant::now();
    let seeds = 40u64;
    let cfg = SequentialConfig { radis: RadisConfig::nn(20, 50, 1000, 200), share_count: 8 };
    let per_seed: Vec<(f64, f64, u64, u64)> = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let (problems, truths, _) = inversion_set(16, 0.05, &mut Rng::new(seed));
            let prior = problems[0].prior.clone();
            let mut errs = [0.0; 2];
            let mut fwd = [0u64; 2];
            for (m, share) in [false, true].into_iter().enumerate() {
                let res = sequential_inversion(&problems, &cfg, share, &mut Rng::with_stream(seed, 8)).unwrap();
                errs[m] = res.iter().zip(&truths).map(|(r, x)| normalized_mae(&prior, &r.map, x)).sum::<f64>() / 16.0;
                fwd[m] = res.iter().map(|r| r.forward_evaluations).sum();
            }
            (errs[0], errs[1], fwd[0], fwd[1])
        })
        .collect();
    let off: Vec<f64> = per_seed.iter().map(|r| r.0).collect();
    let on: Vec<f64> = per_seed.iter().map(|r| r.1).collect();
    let (m_off, m_on) = (median(&off).unwrap(), median(&on).unwrap());
    let wins = per_seed.iter().filter(|r| r.1 < r.0).count();
    let fewer = per_seed.iter().all(|r| r.3 < r.2);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        m_on < m_off && fewer && secs < 1200.0,
        format!(
            "median MAP error over {seeds} seeds: shared {m_on:.4}, independent {m_off:.4} (shared better in {wins}/{seeds}); forward calls fewer when shared: {fewer}; {secs:.1} s"
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n} [{name}]: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "banana grid oracle", c1_oracle());
    let runs = banana_runs();
    report(2, "banana ordering", c2_ordering(&runs));
    report(3, "IS-U budget gap", c3_budget_gap(&runs));
    report(4, "emulator convergence", c4_emulator(&runs));
    report(5, "multimodal baselines", c5_multimodal());
    report(6, "property suite", c6_properties());
    report(7, "sequential inversion", c7_sequential());
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
