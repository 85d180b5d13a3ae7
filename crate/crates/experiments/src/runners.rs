//! One runner per experiment kind.

use std::time::Instant;

use sbl_core::besov::{self, SampledFunction, CORPUS_DELTAS, CORPUS_LENGTH};
use sbl_core::entropy::{entropy_residual, Entropy};
use sbl_core::estimators::{
    bv_seminorm, l1_distance, l1_positive_part, lp_norm, mc_expectation_multi, temporal_l1_modulus, translation_modulus,
    EstimateReport, Execution, Norm,
};
use sbl_core::noise::uniform_grid;
use sbl_core::solver::cfl_dt;
use sbl_core::{
    sample_path, solve, BrownianPath, Field, FluxModel, Grid, InitialData, NoiseKind, NoiseModel, Problem, SblError,
    SolverConfig,
};

use crate::checks::entropy_property_suite;
use crate::config::{ExperimentConfig, ExperimentKind, Window};
use crate::error::{ExperimentError, Result};
use crate::record::{evaluate, ResultRecord, Row, ScaleReport};

/// Tolerated absolute rounding in the contraction distance.
const CONTRACTION_ABS_FLOOR: f64 = 1e-12;

struct Collected {
    rows: Vec<Row>,
    reports: Vec<ScaleReport>,
    ratio_reports: Vec<besov::RatioReport>,
    notes: Vec<String>,
}

impl Collected {
    fn new() -> Self {
        Self { rows: Vec::new(), reports: Vec::new(), ratio_reports: Vec::new(), notes: Vec::new() }
    }

    fn push(&mut self, quantity: &str, scale: f64, report: EstimateReport) {
        self.rows.push(Row::new(quantity, scale, &report));
        self.reports.push(ScaleReport { quantity: quantity.to_string(), scale, report });
    }
}

/// Validates `cfg`, runs it, and writes outputs when `cfg.output` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let c = match cfg.experiment {
        ExperimentKind::BvDecay => bv_decay(cfg)?,
        ExperimentKind::TimeContinuity => time_continuity(cfg)?,
        ExperimentKind::Contraction => contraction(cfg)?,
        ExperimentKind::ViscRate => visc_rate(cfg)?,
        ExperimentKind::ContDepSigma | ExperimentKind::ContDepFlux => cont_dep(cfg)?,
        ExperimentKind::FractionalBv => fractional_bv(cfg)?,
        ExperimentKind::EntropyResidual => entropy_residuals(cfg)?,
        ExperimentKind::LemmaChecks => lemma_checks(cfg)?,
    };
    let mut notes = c.notes;
    let failures: usize = c.reports.iter().map(|r| r.report.failures.len()).max().unwrap_or(0);
    if failures > 0 {
        notes.push(format!("{failures} path(s) failed and were excluded"));
    }
    let record = ResultRecord {
        experiment: cfg.experiment,
        name: cfg.name(),
        config_digest: cfg.digest(),
        seed_base: cfg.mc.seed,
        verdict: evaluate(cfg.experiment, &c.rows),
        rows: c.rows,
        reports: c.reports,
        ratio_reports: c.ratio_reports,
        notes,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &cfg.output {
        record.write_outputs(dir)?;
    }
    Ok(record)
}

fn path(cfg: &ExperimentConfig, seed: u64) -> sbl_core::Result<BrownianPath> {
    sample_path(seed, cfg.problem.noise.modes(), &uniform_grid(cfg.problem.horizon, cfg.options.path_steps))
}

fn solver_config(cfg: &ExperimentConfig, snapshot_times: Vec<f64>) -> SolverConfig {
    SolverConfig {
        flux_scheme: cfg.options.flux_scheme,
        cfl_number: cfg.options.cfl_number,
        dt_override: None,
        snapshot_times,
    }
}

/// Runs `stat` on every path seed and splits the output into one report per name.
fn monte_carlo<F>(cfg: &ExperimentConfig, names: &[String], stat: F) -> Result<Vec<EstimateReport>>
where
    F: Fn(u64) -> sbl_core::Result<Vec<f64>> + Sync,
{
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(mc_expectation_multi(&refs, cfg.mc.paths, cfg.mc.seed, Execution::Parallel, stat)?)
}

fn snapshot_times(cfg: &ExperimentConfig) -> Vec<f64> {
    uniform_grid(cfg.problem.horizon, cfg.options.snapshots)
}

fn bv_decay(cfg: &ExperimentConfig) -> Result<Collected> {
    let times = snapshot_times(cfg);
    let n = times.len();
    let names: Vec<String> =
        times.iter().map(|t| format!("tv@{t}")).chain(times.iter().map(|t| format!("l1@{t}"))).collect();
    let reports = monte_carlo(cfg, &names, |seed| {
        let traj = solve(&cfg.problem, &cfg.grid, &path(cfg, seed)?, &solver_config(cfg, times.clone()))?;
        if traj.snapshots.len() != n {
            return Err(SblError::TimeGridMismatch("missing snapshots".into()));
        }
        let tv = traj.snapshots.iter().map(|s| bv_seminorm(&s.field));
        let l1: Vec<f64> = traj.snapshots.iter().map(|s| lp_norm(&s.field, Norm::L(1))).collect::<sbl_core::Result<_>>()?;
        Ok(tv.chain(l1).collect())
    })?;
    let mut c = Collected::new();
    let mut it = reports.into_iter();
    for (q, _) in [("tv", 0), ("l1", 1)] {
        for &t in &times {
            c.push(q, t, it.next().expect("one report per name"));
        }
    }
    let u0 = cfg.problem.initial.sample(&cfg.grid)?;
    c.rows.push(Row::param("h_tolerance", 2.0 * cfg.grid.min_spacing() * bv_seminorm(&u0)));
    let exact = cfg.problem.flux.lipschitz_fprime == 0.0
        && cfg.problem.epsilon == 0.0
        && matches!(cfg.problem.noise.kind(), NoiseKind::Linear { .. });
    c.rows.push(Row::param("exact", if exact { 1.0 } else { 0.0 }));
    Ok(c)
}

fn time_continuity(cfg: &ExperimentConfig) -> Result<Collected> {
    let t = cfg.problem.horizon;
    let times = uniform_grid(t, cfg.options.path_steps);
    let lags = cfg.scales.clone();
    let window = (0.0, t - lags[lags.len() - 1]);
    let names: Vec<String> = lags.iter().map(|l| format!("modulus@{l}")).collect();
    let reports = monte_carlo(cfg, &names, |seed| {
        let traj = solve(&cfg.problem, &cfg.grid, &path(cfg, seed)?, &solver_config(cfg, times.clone()))?;
        lags.iter().map(|&l| temporal_l1_modulus(&traj, l, window)).collect()
    })?;
    let mut c = Collected::new();
    for (l, r) in lags.iter().zip(reports) {
        c.push("modulus", *l, r);
    }
    Ok(c)
}

fn contraction(cfg: &ExperimentConfig) -> Result<Collected> {
    let times = snapshot_times(cfg);
    let other = Problem { initial: cfg.options.initial_b.clone().expect("validated"), ..cfg.problem.clone() };
    other.validate(&cfg.grid).map_err(|e| ExperimentError::Config(format!("initial_b: {e}")))?;
    let positive = cfg.options.comparison;
    let names: Vec<String> = times.iter().map(|t| format!("distance@{t}")).collect();
    let reports = monte_carlo(cfg, &names, |seed| {
        let p = path(cfg, seed)?;
        let sc = solver_config(cfg, times.clone());
        let a = solve(&cfg.problem, &cfg.grid, &p, &sc)?;
        let b = solve(&other, &cfg.grid, &p, &sc)?;
        a.snapshots
            .iter()
            .zip(&b.snapshots)
            .map(|(x, y)| if positive { l1_positive_part(&x.field, &y.field) } else { l1_distance(&x.field, &y.field) })
            .collect()
    })?;
    let mut c = Collected::new();
    for (t, r) in times.iter().zip(reports) {
        c.push("distance", *t, r);
    }
    c.rows.push(Row::param("abs_floor", CONTRACTION_ABS_FLOOR));
    c.rows.push(Row::param("positive_part", if positive { 1.0 } else { 0.0 }));
    if positive {
        let (u0, v0) = (cfg.problem.initial.sample(&cfg.grid)?, other.initial.sample(&cfg.grid)?);
        if l1_positive_part(&u0, &v0)? > 0.0 {
            c.notes.push("comparison variant run with unordered initial data".into());
        }
    }
    Ok(c)
}

/// Cell averages of a 1-D field on a grid `factor` times coarser.
fn restrict(u: &Field, coarse: &Grid) -> sbl_core::Result<Field> {
    let factor = u.grid().cells(0) / coarse.cells(0);
    let v: Vec<f64> =
        u.values().chunks(factor).map(|c| c.iter().sum::<f64>() / factor as f64).collect();
    Field::new(*coarse, v)
}

fn visc_rate(cfg: &ExperimentConfig) -> Result<Collected> {
    let eps = cfg.scales.clone();
    let eref = cfg.options.reference_epsilon.unwrap_or(eps[0] / 4.0);
    let ref_grid = match cfg.options.reference_cells {
        Some(n) => Grid::new_1d(n, cfg.grid.length(0))?,
        None => cfg.grid,
    };
    let reference = Problem { epsilon: eref, ..cfg.problem.clone() };
    let names: Vec<String> = eps.iter().map(|e| format!("error@{e}")).collect();
    let reports = monte_carlo(cfg, &names, |seed| {
        let p = path(cfg, seed)?;
        let sc = solver_config(cfg, vec![]);
        let uref = solve(&reference, &ref_grid, &p, &sc)?.terminal;
        let uref = if ref_grid == cfg.grid { uref } else { restrict(&uref, &cfg.grid)? };
        eps.iter()
            .map(|&e| {
                let u = solve(&Problem { epsilon: e, ..cfg.problem.clone() }, &cfg.grid, &p, &sc)?.terminal;
                l1_distance(&u, &uref)
            })
            .collect()
    })?;
    let mut c = Collected::new();
    for (e, r) in eps.iter().zip(reports) {
        c.push("error", *e, r);
    }
    c.rows.push(Row::param("reference_epsilon", eref));
    c.rows.push(Row::param("reference_cells", ref_grid.total_cells() as f64));
    Ok(c)
}

/// Perturbed problem for size `eta`.
fn perturbed(cfg: &ExperimentConfig, eta: f64) -> sbl_core::Result<Problem> {
    let p = &cfg.problem;
    Ok(match cfg.experiment {
        ExperimentKind::ContDepFlux => Problem { flux: p.flux.perturbed_linear(eta)?, ..p.clone() },
        _ => {
            let kind = match *p.noise.kind() {
                NoiseKind::Sine { lambda } => NoiseKind::Sine { lambda: lambda + eta },
                NoiseKind::Linear { lambda } => NoiseKind::Linear { lambda: lambda + eta },
                _ => return Err(SblError::InvalidArgument("unsupported noise for a sigma perturbation".into())),
            };
            Problem { noise: NoiseModel::new(kind, p.noise.modes())?, ..p.clone() }
        }
    })
}

/// One step size shared by every run of a perturbation family, so all runs see identical
/// time grids. Chosen from the initial range widened by half its width plus one.
fn common_dt(cfg: &ExperimentConfig, fluxes: &[&FluxModel]) -> Result<Option<f64>> {
    let u0 = cfg.problem.initial.sample(&cfg.grid)?;
    let pad = 0.5 * (u0.max() - u0.min()) + 1.0;
    let range = (u0.min() - pad, u0.max() + pad);
    let mut dt = f64::INFINITY;
    for f in fluxes {
        dt = dt.min(cfl_dt(&cfg.grid, f, cfg.problem.epsilon, range, cfg.options.cfl_number)?);
    }
    Ok(dt.is_finite().then_some(dt))
}

fn cont_dep(cfg: &ExperimentConfig) -> Result<Collected> {
    let etas = cfg.scales.clone();
    let problems: Vec<Problem> = etas.iter().map(|&e| perturbed(cfg, e)).collect::<sbl_core::Result<_>>()?;
    let mut fluxes: Vec<&FluxModel> = problems.iter().map(|p| &p.flux).collect();
    fluxes.push(&cfg.problem.flux);
    let dt = common_dt(cfg, &fluxes)?;
    let names: Vec<String> = etas.iter().map(|e| format!("distance@{e}")).collect();
    let reports = monte_carlo(cfg, &names, |seed| {
        let p = path(cfg, seed)?;
        let sc = SolverConfig { dt_override: dt, ..solver_config(cfg, vec![]) };
        let u = solve(&cfg.problem, &cfg.grid, &p, &sc)?.terminal;
        problems.iter().map(|q| l1_distance(&u, &solve(q, &cfg.grid, &p, &sc)?.terminal)).collect()
    })?;
    let mut c = Collected::new();
    for (e, r) in etas.iter().zip(reports) {
        c.push("distance", *e, r);
    }
    c.rows.push(Row::param("horizon", cfg.problem.horizon));
    if let Some(dt) = dt {
        c.rows.push(Row::param("dt", dt));
    }
    if cfg.options.relative {
        c.notes.push("scale is the relative distance sup |sigma - sigma_hat| / |u| = |lambda - lambda_hat|".into());
    }
    Ok(c)
}

fn fractional_bv(cfg: &ExperimentConfig) -> Result<Collected> {
    let deltas = cfg.scales.clone();
    let psi = cfg.options.weight;
    let mut names: Vec<String> = deltas.iter().map(|d| format!("modulus@{d}")).collect();
    names.push("tv".into());
    let reports = monte_carlo(cfg, &names, |seed| {
        let u = solve(&cfg.problem, &cfg.grid, &path(cfg, seed)?, &solver_config(cfg, vec![]))?.terminal;
        let mut v: Vec<f64> = deltas.iter().map(|&d| translation_modulus(&u, d, &psi)).collect::<sbl_core::Result<_>>()?;
        v.push(bv_seminorm(&u));
        Ok(v)
    })?;
    let mut c = Collected::new();
    let mut it = reports.into_iter();
    for d in &deltas {
        c.push("modulus", *d, it.next().expect("report"));
    }
    c.push("tv", 0.0, it.next().expect("report"));
    let xdep = cfg.problem.noise.depends_on_x();
    if !xdep {
        c.notes.push("warning: noise does not depend on x; the full BV bound applies".into());
    }
    c.rows.push(Row::param("x_dependent", if xdep { 1.0 } else { 0.0 }));
    Ok(c)
}

fn default_entropies() -> Vec<Entropy> {
    vec![
        Entropy::Kruzkov { rho: 0.1, k: 0.25 },
        Entropy::Kruzkov { rho: 0.1, k: 0.5 },
        Entropy::Kruzkov { rho: 0.1, k: 0.75 },
        Entropy::Kruzkov { rho: 0.5, k: 0.5 },
        Entropy::Square,
        Entropy::Linear,
    ]
}

fn label(s: &str) -> String {
    s.replace(',', ";")
}

fn entropy_residuals(cfg: &ExperimentConfig) -> Result<Collected> {
    let o = &cfg.options;
    let t = cfg.problem.horizon;
    let l = cfg.grid.length(0);
    let entropies = if o.entropies.is_empty() { default_entropies() } else { o.entropies.clone() };
    let tests: Vec<(f64, f64)> =
        if o.test_functions.is_empty() { vec![(0.25 * l, 1.0), (0.5 * l, 1.0), (0.75 * l, 1.0)] } else { o.test_functions.clone() };
    let windows = if o.windows.is_empty() { vec![Window { s: 0.0, t }, Window { s: 0.5 * t, t }] } else { o.windows.clone() };
    let phis: Vec<Field> =
        tests.iter().map(|&(c, w)| InitialData::bump(c, w, 1.0).sample(&cfg.grid)).collect::<sbl_core::Result<_>>()?;
    let mut tuples = Vec::new();
    let mut names = Vec::new();
    for e in &entropies {
        for (i, &(c, w)) in tests.iter().enumerate() {
            for win in &windows {
                tuples.push((*e, i, *win));
                names.push(label(&format!("residual|{}|phi(c={c:.4},w={w})|[{},{}]", e.label(), win.s, win.t)));
            }
        }
    }
    let times = uniform_grid(t, o.path_steps);
    // snapshots on every path node, so that all windows are resolvable
    let reports = monte_carlo(cfg, &names, |seed| {
        let p = path(cfg, seed)?;
        let traj = solve(&cfg.problem, &cfg.grid, &p, &solver_config(cfg, times.clone()))?;
        tuples.iter().map(|(e, i, w)| entropy_residual(&traj, &p, e, &phis[*i], w.s, w.t)).collect()
    })?;
    let mut c = Collected::new();
    for (name, r) in names.iter().zip(reports) {
        c.push(name, 0.0, r);
    }
    c.rows.push(Row::param("h", cfg.grid.min_spacing()));
    c.rows.push(Row::param("h_factor", o.residual_h_factor));
    if o.shock_control {
        let (value, name) = shock_control(cfg)?;
        c.rows.push(Row::exact(name, 0.0, value));
    }
    Ok(c)
}

/// Residual of the deterministic inviscid problem around its steepest downward jump at `T`.
fn shock_control(cfg: &ExperimentConfig) -> Result<(f64, String)> {
    let det = Problem { noise: NoiseModel::zero(), epsilon: 0.0, ..cfg.problem.clone() };
    let t = det.horizon;
    let times = uniform_grid(t, cfg.options.path_steps);
    let p = sample_path(cfg.mc.seed, 1, &times)?;
    let traj = solve(&det, &cfg.grid, &p, &solver_config(cfg, times))?;
    let u = &traj.terminal;
    let g = cfg.grid;
    let v = u.values();
    let i = (0..v.len())
        .max_by(|&a, &b| (v[a] - v[g.shifted(a, 0, 1)]).total_cmp(&(v[b] - v[g.shifted(b, 0, 1)])))
        .expect("nonempty grid");
    let center = g.center(0, i) + 0.5 * g.spacing(0);
    let u0 = det.initial.sample(&g)?;
    let entropy = Entropy::Kruzkov { rho: 0.05, k: 0.5 * (u0.min() + u0.max()) };
    let phi = InitialData::bump(center, 1.0, 1.0).sample(&g)?;
    let r = entropy_residual(&traj, &p, &entropy, &phi, 0.0, t)?;
    Ok((r, label(&format!("control|{}|shock(c={center:.4})", entropy.label()))))
}

fn lemma_checks(cfg: &ExperimentConfig) -> Result<Collected> {
    let o = &cfg.options;
    let (r, s) = o.lemma_exponents;
    let deltas = if cfg.scales.is_empty() { CORPUS_DELTAS.to_vec() } else { cfg.scales.clone() };
    let base = cfg.grid.cells(0);
    let mut c = Collected::new();
    for n in [base, 2 * base] {
        let corpus = if o.corpus == "constant" {
            vec![SampledFunction::from_fn("constant", n, CORPUS_LENGTH, |_| 1.0)?]
        } else {
            besov::builtin_corpus(n)?
        };
        let checks = besov::check_corpus(&corpus, &o.weight, r, s, &deltas)?;
        for ch in checks {
            for (dir, rep) in [("sob_to_trans", ch.sob_to_trans), ("trans_to_sob", ch.trans_to_sob)] {
                for row in &rep.rows {
                    c.rows.push(Row::exact(format!("ratio|{dir}|{}|{n}", rep.label), row.delta, row.ratio));
                }
                c.ratio_reports.push(besov::RatioReport { label: format!("{dir}:{}:N={n}", rep.label), rows: rep.rows });
            }
        }
    }
    for p in entropy_property_suite()? {
        c.rows.push(Row::exact(format!("property|{}", p.name), p.tolerance, p.violation));
    }
    c.notes.push(format!("corpus on [-{0}, {0}) independent of the configured grid length", CORPUS_LENGTH / 2.0));
    Ok(c)
}
