//! Explicit finite-volume solver for `du + div f(u) dt = eps Lap u dt + sigma(x, u) dW`.
//!
//! Each step applies a monotone conservative flux difference plus centered diffusion,
//! then an Euler–Maruyama noise update evaluated at the post-transport state (Lie
//! splitting, Ito convention). The time step follows the Brownian path's grid,
//! bisected by bridge refinement wherever the CFL bound of the running solution
//! demands a smaller step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SblError};
use crate::grid::{Field, Grid};
use crate::model::{FluxKind, FluxModel, Problem};
use crate::noise::BrownianPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxScheme {
    #[default]
    LocalLaxFriedrichs,
    EngquistOsher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default)]
    pub flux_scheme: FluxScheme,
    #[serde(default = "default_cfl")]
    pub cfl_number: f64,
    #[serde(default)]
    pub dt_override: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn default_cfl() -> f64 {
    0.45
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { flux_scheme: FluxScheme::default(), cfl_number: default_cfl(), dt_override: None, snapshot_times: vec![] }
    }
}

impl SolverConfig {
    pub fn with_snapshots(snapshot_times: Vec<f64>) -> Self {
        Self { snapshot_times, ..Self::default() }
    }

    fn validate(&self, horizon: f64) -> Result<()> {
        if !(self.cfl_number > 0.0 && self.cfl_number <= 1.0) {
            return Err(SblError::InvalidArgument(format!("cfl number {} outside (0, 1]", self.cfl_number)));
        }
        if let Some(dt) = self.dt_override {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(SblError::InvalidArgument(format!("dt override must be positive, got {dt}")));
            }
        }
        let tol = 1e-12 * horizon;
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0])
            || self.snapshot_times.iter().any(|&t| t < -tol || t > horizon + tol)
        {
            return Err(SblError::InvalidArgument("snapshot times must be sorted within [0, T]".into()));
        }
        Ok(())
    }
}

/// Stable step size `cfl * min over axes of (h / max|f'|, h^2 / (2 d eps))`.
///
/// Terms with a vanishing wave speed or viscosity are dropped; the result is
/// `f64::INFINITY` when nothing restricts the step.
pub fn cfl_dt(grid: &Grid, flux: &FluxModel, epsilon: f64, u_range: (f64, f64), cfl: f64) -> Result<f64> {
    let (lo, hi) = u_range;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(SblError::InvalidArgument(format!("empty or unbounded range [{lo}, {hi}]")));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(SblError::InvalidArgument(format!("cfl number {cfl} outside (0, 1]")));
    }
    let speed = flux.max_abs_deriv(lo, hi);
    let mut dt = f64::INFINITY;
    for axis in 0..grid.dim() {
        let h = grid.spacing(axis);
        if speed > 0.0 {
            dt = dt.min(h / speed);
        }
        if epsilon > 0.0 {
            dt = dt.min(h * h / (2.0 * grid.dim() as f64 * epsilon));
        }
    }
    Ok(cfl * dt)
}

/// Largest `|f'|` between two states, as used by the local Lax–Friedrichs flux.
fn local_speed(flux: &FluxModel, a: f64, b: f64) -> f64 {
    match flux.kind() {
        FluxKind::Burgers => a.abs().max(b.abs()),
        FluxKind::Linear { a: c } => c.abs(),
        FluxKind::Polynomial { coefficients } if coefficients.len() <= 4 => {
            let (lo, hi) = (a.min(b), a.max(b));
            let mut s = flux.deriv(a).abs().max(flux.deriv(b).abs());
            // f'' is at most linear here: check its root
            if coefficients.len() == 4 && coefficients[3] != 0.0 {
                let r = -coefficients[2] / (3.0 * coefficients[3]);
                if r > lo && r < hi {
                    s = s.max(flux.deriv(r).abs());
                }
            }
            s
        }
        _ => flux.max_abs_deriv(a, b),
    }
}

/// `int_a^b max(f', 0)` for `a <= b`, split where `f'` may change sign.
fn positive_variation(flux: &FluxModel, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    for p in flux.deriv_breakpoints(a, b).into_iter().chain(std::iter::once(b)) {
        total += (flux.eval(p) - flux.eval(lo)).max(0.0);
        lo = p;
    }
    total
}

fn increasing_part(flux: &FluxModel, u: f64) -> f64 {
    if u >= 0.0 {
        positive_variation(flux, 0.0, u)
    } else {
        -positive_variation(flux, u, 0.0)
    }
}

/// Two-point monotone flux `F(u_left, u_right)`.
pub fn numerical_flux(ul: f64, ur: f64, flux: &FluxModel, scheme: FluxScheme) -> f64 {
    match scheme {
        FluxScheme::LocalLaxFriedrichs => {
            let alpha = local_speed(flux, ul, ur);
            0.5 * (flux.eval(ul) + flux.eval(ur)) - 0.5 * alpha * (ur - ul)
        }
        FluxScheme::EngquistOsher => match flux.kind() {
            FluxKind::Burgers => 0.5 * ul.max(0.0).powi(2) + 0.5 * ur.min(0.0).powi(2),
            FluxKind::Linear { a } => {
                if *a >= 0.0 {
                    a * ul
                } else {
                    a * ur
                }
            }
            _ => {
                // f(0) + int_0^ul max(f',0) + int_0^ur min(f',0)
                let f0 = flux.eval(0.0);
                let dec_r = (flux.eval(ur) - f0) - increasing_part(flux, ur);
                f0 + increasing_part(flux, ul) + dec_r
            }
        },
    }
}

/// Applies the transport/diffusion update along one axis, adding into `out`.
#[allow(clippy::too_many_arguments)]
fn transport_axis(
    u: &[f64],
    out: &mut [f64],
    grid: &Grid,
    axis: usize,
    dt: f64,
    problem: &Problem,
    scheme: FluxScheme,
    line_buf: &mut Vec<f64>,
    flux_buf: &mut Vec<f64>,
) {
    let nx = grid.cells(0);
    let (n, stride, lines) = if axis == 0 {
        (nx, 1, if grid.dim() == 2 { grid.cells(1) } else { 1 })
    } else {
        (grid.cells(1), nx, nx)
    };
    let h = grid.spacing(axis);
    let adv = dt / h;
    let diff = problem.epsilon * dt / (h * h);
    for line in 0..lines {
        let base = if axis == 0 { line * nx } else { line };
        line_buf.clear();
        line_buf.extend((0..n).map(|i| u[base + i * stride]));
        flux_buf.clear();
        flux_buf.extend((0..n).map(|i| numerical_flux(line_buf[i], line_buf[(i + 1) % n], &problem.flux, scheme)));
        for i in 0..n {
            let im = (i + n - 1) % n;
            let ip = (i + 1) % n;
            let mut du = -adv * (flux_buf[i] - flux_buf[im]);
            if diff != 0.0 {
                du += diff * (line_buf[ip] - 2.0 * line_buf[i] + line_buf[im]);
            }
            out[base + i * stride] += du;
        }
    }
}

/// Advances `state` by one step of length `dt` from time `t` using increments `dw` (one per mode).
pub fn step(
    state: &Field,
    t: f64,
    dt: f64,
    dw: &[f64],
    problem: &Problem,
    config: &SolverConfig,
) -> Result<Field> {
    let grid = *state.grid();
    let u = state.values();
    let mut next = u.to_vec();
    let mut line_buf = Vec::new();
    let mut flux_buf = Vec::new();
    for axis in 0..grid.dim() {
        transport_axis(u, &mut next, &grid, axis, dt, problem, config.flux_scheme, &mut line_buf, &mut flux_buf);
    }
    if !problem.noise.is_zero() {
        let modes = problem.noise.modes();
        if dw.len() < modes {
            return Err(SblError::InvalidArgument(format!("{} increments for {modes} noise modes", dw.len())));
        }
        let dsum: f64 = dw[..modes].iter().sum();
        let x_dep = problem.noise.depends_on_x();
        for (idx, v) in next.iter_mut().enumerate() {
            let x = if x_dep { grid.coords(idx)[0] } else { 0.0 };
            let s = problem.noise.sigma_mode(x, *v);
            if modes == 1 {
                *v += s * dw[0];
            } else {
                *v += s * dsum;
            }
        }
    }
    if let Some(cell) = next.iter().position(|v| !v.is_finite()) {
        return Err(SblError::BlowUp { time: t + dt, cell });
    }
    Ok(Field::from_raw(grid, next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: Field,
}

/// Snapshots of one sample path of the viscous problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub problem: Problem,
    pub path_seed: u64,
    pub snapshots: Vec<Snapshot>,
    pub terminal: Field,
    /// Number of solver steps taken.
    pub steps: usize,
}

const MAX_BISECTIONS: u32 = 48;

struct Stepper<'a> {
    problem: &'a Problem,
    path: &'a BrownianPath,
    config: &'a SolverConfig,
    snapshots: Vec<Snapshot>,
    next_snapshot: usize,
    steps: usize,
    tol: f64,
}

impl Stepper<'_> {
    fn dt_target(&self, u: &Field) -> Result<f64> {
        match self.config.dt_override {
            Some(dt) => Ok(dt),
            None => cfl_dt(u.grid(), &self.problem.flux, self.problem.epsilon, (u.min(), u.max()), self.config.cfl_number),
        }
    }

    fn record(&mut self, t: f64, u: &Field) {
        while let Some(&ts) = self.config.snapshot_times.get(self.next_snapshot) {
            if ts <= t + self.tol {
                self.snapshots.push(Snapshot { time: t, field: u.clone() });
                self.next_snapshot += 1;
            } else {
                break;
            }
        }
    }

    /// Advances over `[t, t + dt]` whose increments are `dw` at bisection `depth`, index `index`.
    fn advance(&mut self, u: Field, t: f64, dt: f64, dw: &[f64], depth: u32, index: u64) -> Result<Field> {
        let target = self.dt_target(&u)?;
        if dt <= target * (1.0 + 1e-12) {
            let next = step(&u, t, dt, dw, self.problem, self.config)?;
            self.steps += 1;
            self.record(t + dt, &next);
            return Ok(next);
        }
        if depth >= MAX_BISECTIONS {
            let cell = u
                .values()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            return Err(SblError::BlowUp { time: t, cell });
        }
        let (mut left, mut right) = (Vec::with_capacity(dw.len()), Vec::with_capacity(dw.len()));
        for (k, &d) in dw.iter().enumerate() {
            let (a, b) = self.path.bridge_split(k, depth + 1, index, d, dt);
            left.push(a);
            right.push(b);
        }
        let half = 0.5 * dt;
        let mid = self.advance(u, t, half, &left, depth + 1, 2 * index)?;
        self.advance(mid, t + half, dt - half, &right, depth + 1, 2 * index + 1)
    }
}

/// Solves `problem` on `grid` from `u_0` to `T`, driven by `path`.
pub fn solve(problem: &Problem, grid: &Grid, path: &BrownianPath, config: &SolverConfig) -> Result<Trajectory> {
    let u0 = problem.validate(grid)?;
    config.validate(problem.horizon)?;
    let horizon = problem.horizon;
    if (path.horizon() - horizon).abs() > 1e-9 * horizon {
        return Err(SblError::TimeGridMismatch(format!(
            "path ends at {} but the problem horizon is {horizon}",
            path.horizon()
        )));
    }
    if path.steps() == 0 {
        return Err(SblError::TimeGridMismatch("path has no steps".into()));
    }
    if path.modes() < problem.noise.modes() {
        return Err(SblError::TimeGridMismatch(format!(
            "path carries {} modes, noise needs {}",
            path.modes(),
            problem.noise.modes()
        )));
    }
    let modes = problem.noise.modes();
    let mut stepper = Stepper {
        problem,
        path,
        config,
        snapshots: Vec::with_capacity(config.snapshot_times.len()),
        next_snapshot: 0,
        steps: 0,
        tol: 1e-9 * horizon / path.steps() as f64,
    };
    stepper.record(0.0, &u0);
    let tg = path.time_grid();
    let mut u = u0;
    for j in 0..path.steps() {
        let dw: Vec<f64> = (0..modes).map(|k| path.increment(k, j)).collect();
        u = stepper.advance(u, tg[j], tg[j + 1] - tg[j], &dw, 0, j as u64)?;
    }
    Ok(Trajectory { problem: problem.clone(), path_seed: path.seed(), snapshots: stepper.snapshots, terminal: u, steps: stepper.steps })
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        self.terminal.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    /// Snapshot recorded closest to `t`.
    pub fn at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
    }

    /// One row per snapshot cell: `time,cell,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,cell,value")?;
        for s in &self.snapshots {
            for (i, v) in s.field.values().iter().enumerate() {
                writeln!(out, "{:e},{i},{v:e}", s.time)?;
            }
        }
        Ok(())
    }

    /// Little-endian binary dump.
    ///
    /// Layout: magic `b"SBLT"`, then `u32` version (1), `u32` dim, `u32` cells along
    /// axis 0, `u32` cells along axis 1 (1 in one dimension), `u32` snapshot count;
    /// then per snapshot an `f64` time followed by the cell values as `f64`, row-major
    /// with axis 0 fastest.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let g = self.grid();
        out.write_all(b"SBLT")?;
        let ny = if g.dim() == 2 { g.cells(1) } else { 1 };
        for v in [1u32, g.dim() as u32, g.cells(0) as u32, ny as u32, self.snapshots.len() as u32] {
            out.write_all(&v.to_le_bytes())?;
        }
        for s in &self.snapshots {
            out.write_all(&s.time.to_le_bytes())?;
            for v in s.field.values() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a dump written by [`Trajectory::write_binary`] as `(time, values)` pairs.
    pub fn read_binary(bytes: &[u8]) -> Result<(Grid, Vec<(f64, Vec<f64>)>)> {
        let bad = |m: &str| SblError::Parse(format!("binary trajectory: {m}"));
        if bytes.len() < 24 || &bytes[..4] != b"SBLT" {
            return Err(bad("missing header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
        let (version, dim, nx, ny, count) = (word(0), word(1), word(2), word(3), word(4));
        if version != 1 {
            return Err(bad("unknown version"));
        }
        let cells = nx * ny;
        if bytes.len() != 24 + count * 8 * (cells + 1) {
            return Err(bad("length does not match header"));
        }
        let f = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
        let mut out = Vec::with_capacity(count);
        let mut off = 24;
        for _ in 0..count {
            let t = f(off);
            off += 8;
            let vals = (0..cells).map(|i| f(off + 8 * i)).collect();
            off += 8 * cells;
            out.push((t, vals));
        }
        // lengths are not stored; unit spacing is reported
        let grid = if dim == 2 {
            Grid::new_2d([nx, ny], [nx as f64, ny as f64])?
        } else {
            Grid::new_1d(nx, nx as f64)?
        };
        Ok((grid, out))
    }
}
