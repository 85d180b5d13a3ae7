//! The default acceptance suite and offline re-evaluation of stored results.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use sbl_core::besov::CORPUS_DELTAS;
use sbl_core::{FluxModel, Grid, InitialData, NoiseModel, Problem};

use crate::config::{ExperimentConfig, ExperimentKind, McSpec, Options};
use crate::error::{ExperimentError, Result};
use crate::record::{evaluate, read_table, ResultRecord, Verdict};
use crate::runners::run;

pub const DEFAULT_SEED: u64 = 20240601;

fn grid(cells: usize) -> Grid {
    Grid::new_1d(cells, TAU).expect("valid grid")
}

fn config(
    name: &str,
    experiment: ExperimentKind,
    problem: Problem,
    cells: usize,
    paths: usize,
    scales: Vec<f64>,
    options: Options,
) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        problem,
        grid: grid(cells),
        mc: McSpec { paths, seed: DEFAULT_SEED },
        scales,
        output: None,
        options: Options { name: Some(name.to_string()), ..options },
    }
}

fn stochastic_burgers(noise: NoiseModel, horizon: f64) -> Problem {
    Problem::new(FluxModel::burgers(), noise, 5e-3, InitialData::step(1.0, 0.0, PI), horizon)
}

/// Configurations of the full acceptance suite, in run order.
pub fn default_suite() -> Vec<ExperimentConfig> {
    let t = 0.5;
    let h = TAU / 512.0;
    let opts = Options::default;
    let gbm = Problem::new(FluxModel::zero(), NoiseModel::linear(0.5), 0.0, InitialData::step(1.0, 0.0, PI), 1.0);
    let two_bumps_a = InitialData::Sum {
        parts: vec![InitialData::bump(0.5 * PI, 1.0, 1.0), InitialData::bump(1.5 * PI, 1.0, 0.5)],
    };
    let two_bumps_b = InitialData::Sum {
        parts: vec![InitialData::bump(0.5 * PI, 1.0, 1.0), InitialData::bump(1.5 * PI, 1.0, 1.0)],
    };
    let lower = InitialData::bump(PI, 1.5, 1.0);
    let upper = InitialData::Sum { parts: vec![InitialData::bump(PI, 1.5, 1.0), InitialData::bump(0.5 * PI, 1.0, 0.5)] };
    let lags: Vec<f64> = [256.0, 128.0, 64.0, 32.0, 16.0].iter().map(|d| t / d).collect();
    let etas = vec![0.01, 0.02, 0.04];
    let shifts: Vec<f64> = [4.0, 8.0, 16.0, 32.0, 64.0].iter().map(|m| m * h).collect();
    vec![
        config("gbm_exactness", ExperimentKind::BvDecay, gbm, 512, 400, vec![], Options { snapshots: 1, ..opts() }),
        config(
            "bv_decay",
            ExperimentKind::BvDecay,
            stochastic_burgers(NoiseModel::linear(0.3), t),
            512,
            200,
            vec![],
            Options { path_steps: 128, ..opts() },
        ),
        config(
            "time_continuity",
            ExperimentKind::TimeContinuity,
            stochastic_burgers(NoiseModel::linear(0.3), t),
            512,
            200,
            lags,
            Options { path_steps: 256, ..opts() },
        ),
        config(
            "contraction",
            ExperimentKind::Contraction,
            Problem { initial: two_bumps_a, ..stochastic_burgers(NoiseModel::linear(0.3), t) },
            512,
            200,
            vec![],
            Options { path_steps: 128, initial_b: Some(two_bumps_b), ..opts() },
        ),
        config(
            "comparison",
            ExperimentKind::Contraction,
            Problem { initial: lower, ..stochastic_burgers(NoiseModel::linear(0.3), t) },
            512,
            200,
            vec![],
            Options { path_steps: 128, initial_b: Some(upper), comparison: true, ..opts() },
        ),
        config(
            "visc_rate",
            ExperimentKind::ViscRate,
            stochastic_burgers(NoiseModel::linear(0.3), t),
            2048,
            100,
            vec![5e-3, 1e-2, 2e-2, 4e-2],
            Options { reference_epsilon: Some(1.25e-3), ..opts() },
        ),
        config(
            "cont_dep_sigma",
            ExperimentKind::ContDepSigma,
            stochastic_burgers(NoiseModel::sine(0.3), t),
            512,
            100,
            etas.clone(),
            opts(),
        ),
        config(
            "cont_dep_flux",
            ExperimentKind::ContDepFlux,
            stochastic_burgers(NoiseModel::sine(0.3), t),
            512,
            100,
            etas.clone(),
            opts(),
        ),
        config(
            "cont_dep_relative",
            ExperimentKind::ContDepSigma,
            stochastic_burgers(NoiseModel::linear(0.3), t),
            512,
            100,
            etas,
            Options { relative: true, ..opts() },
        ),
        config(
            "fractional_bv",
            ExperimentKind::FractionalBv,
            stochastic_burgers(NoiseModel::x_modulated(0.3, 0.5), t),
            512,
            200,
            shifts.clone(),
            opts(),
        ),
        config(
            "fractional_bv_control",
            ExperimentKind::FractionalBv,
            stochastic_burgers(NoiseModel::x_modulated(0.3, 0.0), t),
            512,
            200,
            shifts,
            opts(),
        ),
        config(
            "entropy_residual",
            ExperimentKind::EntropyResidual,
            stochastic_burgers(NoiseModel::linear(0.3), t),
            512,
            200,
            vec![],
            opts(),
        ),
        config(
            "lemma_checks",
            ExperimentKind::LemmaChecks,
            Problem::new(FluxModel::zero(), NoiseModel::zero(), 0.0, InitialData::sine(0.0, 1.0), 1.0),
            1024,
            2,
            CORPUS_DELTAS.to_vec(),
            opts(),
        ),
    ]
}

/// Runs every configuration, writing outputs under `dir`.
pub fn run_suite(dir: &Path, configs: &[ExperimentConfig]) -> Result<Vec<ResultRecord>> {
    configs
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.output = Some(dir.to_path_buf());
            run(&c)
        })
        .collect()
}

/// Verdict recomputed from one stored table.
#[derive(Debug, Clone)]
pub struct Reevaluation {
    pub table: PathBuf,
    pub experiment: ExperimentKind,
    pub verdict: Verdict,
    /// Verdict stored in the JSON summary next to the table, when present.
    pub recorded: Option<bool>,
}

/// Re-evaluates every result table (`<name>.csv`) in `dir`.
pub fn report(dir: &Path) -> Result<Vec<Reevaluation>> {
    let mut tables: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            !(stem.ends_with("_fit") || stem.ends_with("_summary") || stem.ends_with("_ratios"))
        })
        .collect();
    tables.sort();
    if tables.is_empty() {
        return Err(ExperimentError::Results(format!("no result tables in {}", dir.display())));
    }
    tables
        .into_iter()
        .map(|table| {
            let file = std::io::BufReader::new(std::fs::File::open(&table)?);
            let (experiment, rows) = read_table(file)?;
            let recorded = std::fs::read_to_string(table.with_extension("json"))
                .ok()
                .and_then(|t| serde_json::from_str::<ResultRecord>(&t).ok())
                .map(|r| r.verdict.passed);
            Ok(Reevaluation { verdict: evaluate(experiment, &rows), table, experiment, recorded })
        })
        .collect()
}
