//! Experiment configuration documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sbl_core::entropy::Entropy;
use sbl_core::model::validate_problem;
use sbl_core::{FluxScheme, Grid, InitialData, Problem, WeightFunction};

use crate::error::{ExperimentError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BvDecay,
    TimeContinuity,
    Contraction,
    ViscRate,
    ContDepSigma,
    ContDepFlux,
    FractionalBv,
    EntropyResidual,
    LemmaChecks,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::BvDecay => "bv_decay",
            ExperimentKind::TimeContinuity => "time_continuity",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::ViscRate => "visc_rate",
            ExperimentKind::ContDepSigma => "cont_dep_sigma",
            ExperimentKind::ContDepFlux => "cont_dep_flux",
            ExperimentKind::FractionalBv => "fractional_bv",
            ExperimentKind::EntropyResidual => "entropy_residual",
            ExperimentKind::LemmaChecks => "lemma_checks",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub paths: usize,
    pub seed: u64,
}

/// A `(s, t)` window of the entropy residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub s: f64,
    pub t: f64,
}

/// Experiment-specific knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Steps of the base Brownian grid on `[0, T]`.
    pub path_steps: usize,
    /// Number of equal snapshot intervals on `[0, T]` (bv_decay, contraction).
    pub snapshots: usize,
    pub flux_scheme: FluxScheme,
    pub cfl_number: f64,
    /// Second initial datum (contraction).
    pub initial_b: Option<InitialData>,
    /// Use `(u - v)^+` instead of `|u - v|` (contraction).
    pub comparison: bool,
    /// Perturb `sigma = lambda u` to `(lambda + eta) u` and measure against `|lambda - lambda_hat|`.
    pub relative: bool,
    /// Viscosity of the reference run (visc_rate).
    pub reference_epsilon: Option<f64>,
    /// Cells of the reference grid, a multiple of the run grid (visc_rate).
    pub reference_cells: Option<usize>,
    /// Weight in the translation modulus (fractional_bv, lemma_checks).
    pub weight: WeightFunction,
    /// Entropies of the residual family; empty selects the default family.
    pub entropies: Vec<Entropy>,
    /// Bump test functions `(center, width)`; empty selects the default family.
    pub test_functions: Vec<(f64, f64)>,
    /// Residual windows; empty selects `(0, T)` and `(T/2, T)`.
    pub windows: Vec<Window>,
    /// Allowed negative bias per unit `h` of the residual mean.
    pub residual_h_factor: f64,
    /// Deterministic shock control run (entropy_residual).
    pub shock_control: bool,
    /// Exponents `(r, s)` of the comparison inequalities (lemma_checks).
    pub lemma_exponents: (f64, f64),
    /// `builtin` or `constant` (lemma_checks).
    pub corpus: String,
    /// Human-readable name of the run; defaults to the experiment name.
    pub name: Option<String>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            path_steps: 128,
            snapshots: 8,
            flux_scheme: FluxScheme::default(),
            cfl_number: 0.45,
            initial_b: None,
            comparison: false,
            relative: false,
            reference_epsilon: None,
            reference_cells: None,
            weight: WeightFunction::One,
            entropies: Vec::new(),
            test_functions: Vec::new(),
            windows: Vec::new(),
            residual_h_factor: 5.0,
            shock_control: true,
            lemma_exponents: (0.25, 0.5),
            corpus: "builtin".into(),
            name: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub problem: Problem,
    pub grid: Grid,
    pub mc: McSpec,
    #[serde(default)]
    pub scales: Vec<f64>,
    /// Output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub options: Options,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn name(&self) -> String {
        self.options.name.clone().unwrap_or_else(|| self.experiment.as_str().to_string())
    }

    /// SHA-256 of the canonical JSON form, excluding the output location.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks the document; assumption violations of the model are reported as errors too.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        self.problem.validate(&self.grid).map_err(|e| ExperimentError::Config(e.to_string()))?;
        if self.mc.paths < 2 && self.experiment != ExperimentKind::LemmaChecks {
            return bad(format!("mc.paths must be >= 2, got {}", self.mc.paths));
        }
        if self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("scales must be positive".into());
        }
        if self.scales.windows(2).any(|w| w[1] <= w[0]) {
            return bad("scales must be strictly increasing".into());
        }
        let o = &self.options;
        if o.path_steps == 0 || o.snapshots == 0 {
            return bad("path_steps and snapshots must be positive".into());
        }
        if !(o.cfl_number > 0.0 && o.cfl_number <= 1.0) {
            return bad(format!("cfl_number {} outside (0, 1]", o.cfl_number));
        }
        let report = validate_problem(&self.problem, sbl_core::model::WORKING_RANGE);
        if let Some(c) = report.checks.iter().find(|c| !c.satisfied) {
            return bad(format!(
                "model assumption {} fails: observed {} > declared {} at {:?}",
                c.name, c.observed, c.declared, c.witness
            ));
        }
        let h = self.grid.min_spacing();
        let t = self.problem.horizon;
        match self.experiment {
            ExperimentKind::BvDecay | ExperimentKind::Contraction => {
                if o.path_steps % o.snapshots != 0 {
                    return bad("path_steps must be a multiple of snapshots".into());
                }
                if self.experiment == ExperimentKind::Contraction && o.initial_b.is_none() {
                    return bad("contraction needs options.initial_b".into());
                }
            }
            ExperimentKind::TimeContinuity => {
                if self.scales.is_empty() {
                    return bad("time_continuity needs a list of time lags".into());
                }
                let dt = t / o.path_steps as f64;
                for s in &self.scales {
                    let k = s / dt;
                    if (k - k.round()).abs() > 1e-6 || k.round() < 1.0 {
                        return bad(format!("lag {s} is not a multiple of the path step {dt}"));
                    }
                }
                if *self.scales.last().expect("nonempty") >= t {
                    return bad("largest lag must be below T".into());
                }
            }
            ExperimentKind::ViscRate => {
                if self.scales.len() < 3 {
                    return bad(format!("need >= 3 scales, got {}", self.scales.len()));
                }
                let eref = o.reference_epsilon.unwrap_or(self.scales[0] / 4.0);
                if !(eref > 0.0 && eref < self.scales[0]) {
                    return bad("reference_epsilon must be below every scale".into());
                }
                if let Some(rc) = o.reference_cells {
                    if self.grid.dim() != 1 || rc % self.grid.cells(0) != 0 {
                        return bad("reference_cells must be a multiple of the 1-D grid cells".into());
                    }
                }
            }
            ExperimentKind::ContDepSigma => {
                if self.scales.len() < 3 {
                    return bad(format!("need >= 3 scales, got {}", self.scales.len()));
                }
                let ok = if o.relative {
                    matches!(self.problem.noise.kind(), sbl_core::NoiseKind::Linear { .. })
                } else {
                    self.problem.noise.sup_norm().is_some()
                        && matches!(self.problem.noise.kind(), sbl_core::NoiseKind::Sine { .. })
                };
                if !ok {
                    return bad(if o.relative {
                        "relative sigma perturbation needs linear noise".into()
                    } else {
                        "||sigma - sigma_hat||_inf undefined for unbounded noise; use options.relative with linear noise"
                            .into()
                    });
                }
            }
            ExperimentKind::ContDepFlux => {
                if self.scales.len() < 3 {
                    return bad(format!("need >= 3 scales, got {}", self.scales.len()));
                }
            }
            ExperimentKind::FractionalBv => {
                if self.scales.len() < 3 {
                    return bad(format!("need >= 3 scales, got {}", self.scales.len()));
                }
                if self.scales[0] < 4.0 * h * (1.0 - 1e-9) {
                    return bad(format!("smallest shift {} below 4h = {}", self.scales[0], 4.0 * h));
                }
            }
            ExperimentKind::EntropyResidual => {
                for w in &o.windows {
                    if !(0.0 <= w.s && w.s < w.t && w.t <= t) {
                        return bad(format!("window ({}, {}) outside [0, T]", w.s, w.t));
                    }
                }
                if o.test_functions.iter().any(|(_, w)| *w <= 0.0) {
                    return bad("test function widths must be positive".into());
                }
            }
            ExperimentKind::LemmaChecks => {
                let (r, s) = o.lemma_exponents;
                if !(0.0 < r && r < s && s < 1.0) {
                    return bad(format!("need 0 < r < s < 1, got ({r}, {s})"));
                }
                if !matches!(o.corpus.as_str(), "builtin" | "constant") {
                    return bad(format!("unknown corpus {}", o.corpus));
                }
                if self.grid.dim() != 1 || self.grid.cells(0) % 128 != 0 {
                    return bad("lemma checks need a 1-D grid with a multiple of 128 cells".into());
                }
                if self.scales.iter().any(|d| *d > 1.0) {
                    return bad("lemma scales must lie in (0, 1]".into());
                }
            }
        }
        Ok(())
    }
}
