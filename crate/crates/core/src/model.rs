//! Flux and noise models, initial data, and the standing-assumption checks.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SblError};
use crate::grid::{Field, Grid};

/// Default interval on which model bounds are computed and assumptions checked.
pub const WORKING_RANGE: (f64, f64) = (-10.0, 10.0);

/// The convective flux `f`. In two dimensions every axis uses the same scalar flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluxKind {
    /// `f(u) = u^2 / 2`
    Burgers,
    /// `f(u) = a u`
    Linear { a: f64 },
    /// `f(u) = sum_k c_k u^k`
    Polynomial { coefficients: Vec<f64> },
    /// Piecewise-linear interpolation of `(u, f)` samples, extended linearly.
    Table { u: Vec<f64>, f: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FluxKind", into = "FluxKind")]
pub struct FluxModel {
    kind: FluxKind,
    /// Exponent `r` of the growth bound `|f(u)| <= C (1 + |u|^r)`.
    pub growth_exponent: u32,
    /// Constant `C` of the growth bound.
    pub growth_constant: f64,
    /// `max |f'|` over [`WORKING_RANGE`].
    pub lipschitz_fprime: f64,
    /// `max |f''|` over [`WORKING_RANGE`].
    pub bound_fsecond: f64,
}

impl TryFrom<FluxKind> for FluxModel {
    type Error = SblError;
    fn try_from(kind: FluxKind) -> Result<Self> {
        FluxModel::new(kind)
    }
}

impl From<FluxModel> for FluxKind {
    fn from(m: FluxModel) -> Self {
        m.kind
    }
}

impl FluxModel {
    pub fn new(kind: FluxKind) -> Result<Self> {
        let (growth_exponent, growth_constant) = match &kind {
            FluxKind::Burgers => (2, 0.5),
            FluxKind::Linear { a } => (1, a.abs()),
            FluxKind::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(SblError::InvalidArgument("polynomial flux needs finite coefficients".into()));
                }
                let deg = coefficients.iter().rposition(|&c| c != 0.0).unwrap_or(0);
                (deg as u32, coefficients.iter().map(|c| c.abs()).sum())
            }
            FluxKind::Table { u, f } => {
                if u.len() < 2 || u.len() != f.len() {
                    return Err(SblError::InvalidArgument("flux table needs >= 2 matching (u, f) samples".into()));
                }
                if u.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(SblError::InvalidArgument("flux table abscissae must increase".into()));
                }
                let c = u.iter().zip(f).map(|(u, f)| f.abs() / (1.0 + u.abs())).fold(0.0, f64::max);
                let slope_max = u
                    .windows(2)
                    .zip(f.windows(2))
                    .map(|(uw, fw)| ((fw[1] - fw[0]) / (uw[1] - uw[0])).abs())
                    .fold(0.0, f64::max);
                (1, c + slope_max)
            }
        };
        let mut model = Self { kind, growth_exponent, growth_constant, lipschitz_fprime: 0.0, bound_fsecond: 0.0 };
        let (lo, hi) = WORKING_RANGE;
        model.lipschitz_fprime = model.max_abs_deriv(lo, hi);
        model.bound_fsecond = model.max_abs_second(lo, hi);
        Ok(model)
    }

    pub fn burgers() -> Self {
        Self::new(FluxKind::Burgers).expect("valid")
    }

    pub fn linear(a: f64) -> Self {
        Self::new(FluxKind::Linear { a }).expect("valid")
    }

    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    /// Returns the same flux plus `eta * u`.
    pub fn perturbed_linear(&self, eta: f64) -> Result<Self> {
        let kind = match &self.kind {
            FluxKind::Burgers => FluxKind::Polynomial { coefficients: vec![0.0, eta, 0.5] },
            FluxKind::Linear { a } => FluxKind::Linear { a: a + eta },
            FluxKind::Polynomial { coefficients } => {
                let mut c = coefficients.clone();
                if c.len() < 2 {
                    c.resize(2, 0.0);
                }
                c[1] += eta;
                FluxKind::Polynomial { coefficients: c }
            }
            FluxKind::Table { u, f } => FluxKind::Table {
                u: u.clone(),
                f: u.iter().zip(f).map(|(u, f)| f + eta * u).collect(),
            },
        };
        Self::new(kind)
    }

    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => 0.5 * u * u,
            FluxKind::Linear { a } => a * u,
            FluxKind::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c),
            FluxKind::Table { u: us, f } => {
                let k = table_segment(us, u);
                f[k] + (f[k + 1] - f[k]) / (us[k + 1] - us[k]) * (u - us[k])
            }
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => u,
            FluxKind::Linear { a } => *a,
            FluxKind::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * u + k as f64 * c),
            FluxKind::Table { u: us, f } => {
                let k = table_segment(us, u);
                (f[k + 1] - f[k]) / (us[k + 1] - us[k])
            }
        }
    }

    pub fn second(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => 1.0,
            FluxKind::Linear { .. } | FluxKind::Table { .. } => 0.0,
            FluxKind::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * u + (k * (k - 1)) as f64 * c),
        }
    }

    /// Points in `(lo, hi)` where `f'` may change sign or jump, in increasing order.
    pub(crate) fn deriv_breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = match &self.kind {
            FluxKind::Burgers => vec![0.0],
            FluxKind::Linear { .. } => vec![],
            FluxKind::Table { u, .. } => u.clone(),
            FluxKind::Polynomial { .. } => {
                // sign changes of f' located by sampling and bisection
                let n = 256;
                let mut roots = Vec::new();
                let x = |i: usize| lo + (hi - lo) * i as f64 / n as f64;
                for i in 0..n {
                    let (mut a, mut b) = (x(i), x(i + 1));
                    let (fa, fb) = (self.deriv(a), self.deriv(b));
                    if fa == 0.0 {
                        roots.push(a);
                    } else if fa * fb < 0.0 {
                        for _ in 0..200 {
                            let m = 0.5 * (a + b);
                            if m <= a || m >= b {
                                break;
                            }
                            if self.deriv(a) * self.deriv(m) <= 0.0 {
                                b = m;
                            } else {
                                a = m;
                            }
                        }
                        roots.push(0.5 * (a + b));
                    }
                }
                roots
            }
        };
        pts.retain(|&p| p > lo && p < hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `max |f'(u)|` for `u` in `[lo, hi]`.
    pub fn max_abs_deriv(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        match &self.kind {
            FluxKind::Burgers => lo.abs().max(hi.abs()),
            FluxKind::Linear { a } => a.abs(),
            FluxKind::Table { u, .. } => {
                let mut m = self.deriv(lo).abs().max(self.deriv(hi).abs());
                for w in u.windows(2) {
                    if w[1] > lo && w[0] < hi {
                        m = m.max(self.deriv(0.5 * (w[0] + w[1])).abs());
                    }
                }
                m
            }
            FluxKind::Polynomial { .. } => sample_max(lo, hi, |u| self.deriv(u).abs()),
        }
    }

    pub fn max_abs_second(&self, lo: f64, hi: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => 1.0,
            FluxKind::Linear { .. } | FluxKind::Table { .. } => 0.0,
            FluxKind::Polynomial { .. } => sample_max(lo.min(hi), lo.max(hi), |u| self.second(u).abs()),
        }
    }
}

fn table_segment(us: &[f64], u: f64) -> usize {
    let n = us.len();
    match us.partition_point(|&x| x <= u) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    }
}

fn sample_max(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let n = 4096;
    (0..=n).map(|i| g(lo + (hi - lo) * i as f64 / n as f64)).fold(0.0, f64::max)
}

/// Noise coefficient `sigma(x, u)` multiplying `dW`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Zero,
    /// `sigma(u) = lambda u`
    Linear { lambda: f64 },
    /// `sigma(u) = lambda sin(u)`
    Sine { lambda: f64 },
    /// `sigma(x, u) = lambda (1 + mu sin x) u`
    XModulated { lambda: f64, mu: f64 },
    /// `sigma(u) = sum_k c_k u^k` with a user-declared Lipschitz constant.
    Polynomial { coefficients: Vec<f64>, lipschitz_u: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NoiseSpec {
    #[serde(flatten)]
    kind: NoiseKind,
    #[serde(default = "one")]
    modes: usize,
}

fn one() -> usize {
    1
}

/// Noise model with `modes` independent Brownian drivers.
///
/// Mode `k` carries `sigma_k = sigma / sqrt(modes)`, so the quadratic variation
/// `sum_k sigma_k^2` equals `sigma^2` for every mode count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseSpec", into = "NoiseSpec")]
pub struct NoiseModel {
    kind: NoiseKind,
    modes: usize,
    pub lipschitz_u: f64,
    pub lipschitz_x: f64,
}

impl TryFrom<NoiseSpec> for NoiseModel {
    type Error = SblError;
    fn try_from(s: NoiseSpec) -> Result<Self> {
        NoiseModel::new(s.kind, s.modes)
    }
}

impl From<NoiseModel> for NoiseSpec {
    fn from(m: NoiseModel) -> Self {
        NoiseSpec { kind: m.kind, modes: m.modes }
    }
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(SblError::InvalidArgument("noise needs at least one mode".into()));
        }
        let (lu, lx) = match &kind {
            NoiseKind::Zero => (0.0, 0.0),
            NoiseKind::Linear { lambda } | NoiseKind::Sine { lambda } => (lambda.abs(), 0.0),
            NoiseKind::XModulated { lambda, mu } => (lambda.abs() * (1.0 + mu.abs()), lambda.abs() * mu.abs()),
            NoiseKind::Polynomial { lipschitz_u, .. } => (*lipschitz_u, 0.0),
        };
        Ok(Self { kind, modes, lipschitz_u: lu, lipschitz_x: lx })
    }

    pub fn zero() -> Self {
        Self::new(NoiseKind::Zero, 1).expect("valid")
    }

    pub fn linear(lambda: f64) -> Self {
        Self::new(NoiseKind::Linear { lambda }, 1).expect("valid")
    }

    pub fn sine(lambda: f64) -> Self {
        Self::new(NoiseKind::Sine { lambda }, 1).expect("valid")
    }

    pub fn x_modulated(lambda: f64, mu: f64) -> Self {
        Self::new(NoiseKind::XModulated { lambda, mu }, 1).expect("valid")
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn with_modes(mut self, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(SblError::InvalidArgument("noise needs at least one mode".into()));
        }
        self.modes = modes;
        Ok(self)
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            NoiseKind::Zero => true,
            NoiseKind::Linear { lambda } | NoiseKind::Sine { lambda } | NoiseKind::XModulated { lambda, .. } => {
                *lambda == 0.0
            }
            NoiseKind::Polynomial { coefficients, .. } => coefficients.iter().all(|&c| c == 0.0),
        }
    }

    pub fn depends_on_x(&self) -> bool {
        matches!(self.kind, NoiseKind::XModulated { mu, .. } if mu != 0.0)
    }

    /// `sup |sigma|` over all `u`, when finite.
    pub fn sup_norm(&self) -> Option<f64> {
        match &self.kind {
            NoiseKind::Zero => Some(0.0),
            NoiseKind::Sine { lambda } => Some(lambda.abs()),
            _ if self.is_zero() => Some(0.0),
            _ => None,
        }
    }

    /// Total noise amplitude `sigma(x, u)` (sum over modes of `sigma_k^2` equals its square).
    pub fn sigma(&self, x: f64, u: f64) -> f64 {
        match &self.kind {
            NoiseKind::Zero => 0.0,
            NoiseKind::Linear { lambda } => lambda * u,
            NoiseKind::Sine { lambda } => lambda * u.sin(),
            NoiseKind::XModulated { lambda, mu } => lambda * (1.0 + mu * x.sin()) * u,
            NoiseKind::Polynomial { coefficients, .. } => coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c),
        }
    }

    /// Coefficient of a single mode.
    pub fn sigma_mode(&self, x: f64, u: f64) -> f64 {
        if self.modes == 1 {
            self.sigma(x, u)
        } else {
            self.sigma(x, u) / (self.modes as f64).sqrt()
        }
    }
}

/// Initial data `u_0`, sampled at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `amplitude cos^2(pi r / (2 width))` for `r = |x - center| < width`, else 0.
    Bump { center: f64, width: f64, amplitude: f64 },
    /// `left` for `x_0 < position`, `right` otherwise.
    Step { left: f64, right: f64, position: f64 },
    /// `offset + amplitude sum_i sin(wavenumber x_i)`
    Sine { amplitude: f64, wavenumber: f64, #[serde(default)] offset: f64 },
    /// Explicit cell values.
    Table { values: Vec<f64> },
    Sum { parts: Vec<InitialData> },
}

impl InitialData {
    pub fn bump(center: f64, width: f64, amplitude: f64) -> Self {
        Self::Bump { center, width, amplitude }
    }

    pub fn step(left: f64, right: f64, position: f64) -> Self {
        Self::Step { left, right, position }
    }

    pub fn sine(amplitude: f64, wavenumber: f64) -> Self {
        Self::Sine { amplitude, wavenumber, offset: 0.0 }
    }

    fn point(&self, x: [f64; 2], dim: usize) -> f64 {
        match self {
            InitialData::Bump { center, width, amplitude } => {
                let r = (0..dim).map(|a| (x[a] - center).powi(2)).sum::<f64>().sqrt();
                if r < *width {
                    amplitude * (std::f64::consts::FRAC_PI_2 * r / width).cos().powi(2)
                } else {
                    0.0
                }
            }
            InitialData::Step { left, right, position } => {
                if x[0] < *position {
                    *left
                } else {
                    *right
                }
            }
            InitialData::Sine { amplitude, wavenumber, offset } => {
                offset + amplitude * (0..dim).map(|a| (wavenumber * x[a]).sin()).sum::<f64>()
            }
            InitialData::Table { .. } => unreachable!("tables are sampled directly"),
            InitialData::Sum { parts } => parts.iter().map(|p| p.point(x, dim)).sum(),
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        match self {
            InitialData::Table { values } => Field::new(*grid, values.clone()),
            InitialData::Sum { parts } if parts.iter().any(|p| matches!(p, InitialData::Table { .. })) => {
                let mut acc = Field::constant(*grid, 0.0);
                for p in parts {
                    acc = acc.add(&p.sample(grid)?)?;
                }
                Ok(acc)
            }
            _ => Field::new(*grid, Field::from_fn(*grid, |x| self.point(x, grid.dim())).into_values()),
        }
    }
}

/// One instance of the viscous stochastic balance law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub flux: FluxModel,
    pub noise: NoiseModel,
    pub epsilon: f64,
    pub initial: InitialData,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl Problem {
    pub fn new(flux: FluxModel, noise: NoiseModel, epsilon: f64, initial: InitialData, horizon: f64) -> Self {
        Self { flux, noise, epsilon, initial, horizon }
    }

    /// Checks the structural invariants and returns the sampled initial field.
    pub fn validate(&self, grid: &Grid) -> Result<Field> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(SblError::InvalidArgument(format!("viscosity must be >= 0, got {}", self.epsilon)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SblError::InvalidArgument(format!("horizon must be > 0, got {}", self.horizon)));
        }
        let u0 = self.initial.sample(grid)?;
        let vol = grid.cell_volume();
        let l1: f64 = u0.values().iter().map(|v| v.abs()).sum::<f64>() * vol;
        let l2: f64 = u0.values().iter().map(|v| v * v).sum::<f64>() * vol;
        if !(l1.is_finite() && l2.is_finite()) {
            return Err(SblError::InvalidArgument("initial data has infinite norm".into()));
        }
        Ok(u0)
    }
}

/// Outcome of one standing-assumption check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub satisfied: bool,
    /// Largest sampled value of the quantity bounded by the assumption.
    pub observed: f64,
    /// Declared bound the observation is compared to.
    pub declared: f64,
    /// Point (`u`, or `(x, u)` packed as `[x, u]`) where `observed` was attained.
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const SAMPLES: usize = 20_000;
const X_SAMPLES: [f64; 5] = [0.0, 0.7, 1.6, 3.3, 4.9];

fn within(observed: f64, declared: f64) -> bool {
    observed <= declared * (1.0 + 1e-9) + 1e-12
}

/// Checks the noise and flux assumptions on `range`, reporting violations with a witness.
pub fn validate_problem(p: &Problem, range: (f64, f64)) -> ValidationReport {
    let (lo, hi) = (range.0.min(range.1), range.0.max(range.1));
    let u_at = |i: usize| lo + (hi - lo) * i as f64 / SAMPLES as f64;
    let xs: &[f64] = if p.noise.depends_on_x() { &X_SAMPLES } else { &X_SAMPLES[..1] };
    let noise = &p.noise;
    let mut checks = Vec::new();

    let mut worst = (0.0, vec![0.0, 0.0]);
    for &x in xs {
        let s = noise.sigma(x, 0.0).abs();
        if s > worst.0 {
            worst = (s, vec![x, 0.0]);
        }
    }
    checks.push(AssumptionCheck {
        name: "sigma_zero_at_zero",
        satisfied: worst.0 == 0.0,
        observed: worst.0,
        declared: 0.0,
        witness: worst.1,
    });

    let mut worst = (0.0, vec![0.0, lo]);
    for &x in xs {
        for i in 0..SAMPLES {
            let (u, v) = (u_at(i), u_at(i + 1));
            let r = (noise.sigma(x, v) - noise.sigma(x, u)).abs() / (v - u);
            if r > worst.0 {
                worst = (r, vec![x, 0.5 * (u + v)]);
            }
        }
    }
    checks.push(AssumptionCheck {
        name: "sigma_lipschitz_u",
        satisfied: within(worst.0, noise.lipschitz_u),
        observed: worst.0,
        declared: noise.lipschitz_u,
        witness: worst.1,
    });

    if p.noise.depends_on_x() {
        let mut worst = (0.0, vec![0.0, 0.0]);
        let n = 2048;
        let two_pi = std::f64::consts::TAU;
        for i in 0..n {
            let (x, y) = (two_pi * i as f64 / n as f64, two_pi * (i + 1) as f64 / n as f64);
            for k in 0..=20 {
                let u = lo + (hi - lo) * k as f64 / 20.0;
                if u == 0.0 {
                    continue;
                }
                let r = (noise.sigma(x, u) - noise.sigma(y, u)).abs() / ((y - x) * u.abs());
                if r > worst.0 {
                    worst = (r, vec![0.5 * (x + y), u]);
                }
            }
        }
        checks.push(AssumptionCheck {
            name: "sigma_lipschitz_x",
            satisfied: within(worst.0, noise.lipschitz_x),
            observed: worst.0,
            declared: noise.lipschitz_x,
            witness: worst.1,
        });
    }

    let r = p.flux.growth_exponent as i32;
    let mut worst = (0.0, vec![lo]);
    for i in 0..=SAMPLES {
        let u = u_at(i);
        let ratio = p.flux.eval(u).abs() / (1.0 + u.abs().powi(r));
        if ratio > worst.0 {
            worst = (ratio, vec![u]);
        }
    }
    checks.push(AssumptionCheck {
        name: "flux_polynomial_growth",
        satisfied: within(worst.0, p.flux.growth_constant),
        observed: worst.0,
        declared: p.flux.growth_constant,
        witness: worst.1,
    });

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(noise: NoiseModel) -> Problem {
        Problem::new(FluxModel::burgers(), noise, 0.0, InitialData::sine(1.0, 1.0), 1.0)
    }

    #[test]
    fn zero_noise_satisfies_everything() {
        let rep = validate_problem(&problem(NoiseModel::zero()), WORKING_RANGE);
        assert!(rep.all_satisfied(), "{rep:?}");
    }

    #[test]
    fn linear_noise_lipschitz_is_confirmed() {
        let rep = validate_problem(&problem(NoiseModel::linear(0.5)), (-10.0, 10.0));
        assert!(rep.all_satisfied());
        let lip = rep.get("sigma_lipschitz_u").unwrap();
        assert!((lip.observed - 0.5).abs() < 1e-9);
        assert_eq!(rep.get("sigma_zero_at_zero").unwrap().observed, 0.0);
    }

    #[test]
    fn quadratic_noise_violates_lipschitz_near_the_edge() {
        let noise = NoiseModel::new(
            NoiseKind::Polynomial { coefficients: vec![0.0, 0.0, 1.0], lipschitz_u: 1.0 },
            1,
        )
        .unwrap();
        let rep = validate_problem(&problem(noise), (-10.0, 10.0));
        let lip = rep.get("sigma_lipschitz_u").unwrap();
        assert!(!lip.satisfied);
        // oracle: |u^2 - v^2| / |u - v| = |u + v|, largest at the range boundary
        let brute = (0..2000)
            .flat_map(|i| (0..20).map(move |j| (i, j)))
            .map(|(i, j)| {
                let u = -10.0 + 20.0 * i as f64 / 2000.0;
                let v = u + 1e-3 * (j as f64 + 1.0);
                ((v * v - u * u) / (v - u)).abs()
            })
            .fold(0.0, f64::max);
        assert!((lip.observed - brute).abs() < 0.05);
        assert!(lip.witness[1].abs() > 9.9);
    }

    #[test]
    fn x_modulated_noise_checks_both_lipschitz_bounds() {
        let rep = validate_problem(&problem(NoiseModel::x_modulated(0.3, 0.5)), WORKING_RANGE);
        assert!(rep.all_satisfied(), "{rep:?}");
        assert!(rep.get("sigma_lipschitz_x").is_some());
    }

    #[test]
    fn builtin_noise_vanishes_at_zero_for_any_x() {
        let models = [
            NoiseModel::zero(),
            NoiseModel::linear(0.7),
            NoiseModel::sine(0.3),
            NoiseModel::x_modulated(0.3, 0.9),
        ];
        let mut x = 0.123_f64;
        for _ in 0..1000 {
            x = (x * 7919.0 + 0.618).fract() * 100.0 - 50.0;
            for m in &models {
                assert_eq!(m.sigma(x, 0.0), 0.0);
            }
        }
    }

    #[test]
    fn flux_derivatives_match_finite_differences() {
        let models = [
            FluxModel::burgers(),
            FluxModel::linear(-1.5),
            FluxModel::new(FluxKind::Polynomial { coefficients: vec![0.1, -0.3, 0.2, 0.05] }).unwrap(),
        ];
        for m in &models {
            for &u in &[-2.0, -0.3, 0.0, 0.9, 3.0] {
                let h = 1e-5;
                let d1 = (m.eval(u + h) - m.eval(u - h)) / (2.0 * h);
                let d2 = (m.deriv(u + h) - m.deriv(u - h)) / (2.0 * h);
                assert!((d1 - m.deriv(u)).abs() < 1e-7);
                assert!((d2 - m.second(u)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn table_flux_interpolates_and_extends() {
        let m = FluxModel::new(FluxKind::Table { u: vec![-1.0, 0.0, 1.0], f: vec![0.5, 0.0, 0.5] }).unwrap();
        assert_eq!(m.eval(0.5), 0.25);
        assert_eq!(m.eval(2.0), 1.0);
        assert_eq!(m.deriv(-3.0), -0.5);
        assert_eq!(m.max_abs_deriv(-1.0, 1.0), 0.5);
        assert!(FluxModel::new(FluxKind::Table { u: vec![1.0, 0.0], f: vec![0.0, 0.0] }).is_err());
    }

    #[test]
    fn perturbed_flux_adds_linear_term() {
        let f = FluxModel::burgers();
        let g = f.perturbed_linear(0.02).unwrap();
        for &u in &[-1.0, 0.3, 2.0] {
            assert!((g.eval(u) - f.eval(u) - 0.02 * u).abs() < 1e-15);
            assert!((g.deriv(u) - f.deriv(u) - 0.02).abs() < 1e-15);
        }
    }

    #[test]
    fn problem_json_round_trip() {
        let p = Problem::new(
            FluxModel::burgers(),
            NoiseModel::linear(0.3),
            5e-3,
            InitialData::Sum { parts: vec![InitialData::bump(1.0, 0.5, 1.0), InitialData::step(1.0, 0.0, 3.0)] },
            0.5,
        );
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains(r#""T":0.5"#));
        let back: Problem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let parsed: Problem = serde_json::from_str(
            r#"{"flux":{"kind":"burgers"},"noise":{"kind":"x_modulated","lambda":0.3,"mu":0.5},
                "epsilon":0.005,"initial":{"kind":"sine","amplitude":1.0,"wavenumber":1.0},"T":1.0}"#,
        )
        .unwrap();
        assert_eq!(parsed.noise.modes(), 1);
        assert!(parsed.noise.depends_on_x());
    }

    #[test]
    fn problem_validation_rejects_bad_parameters() {
        let g = Grid::new_1d(16, 1.0).unwrap();
        let mut p = problem(NoiseModel::zero());
        p.epsilon = -1.0;
        assert!(p.validate(&g).is_err());
        p.epsilon = 0.0;
        p.horizon = 0.0;
        assert!(p.validate(&g).is_err());
        p.horizon = 1.0;
        p.initial = InitialData::Table { values: vec![1.0; 3] };
        assert!(p.validate(&g).is_err());
    }
}
