//! Smooth approximations of the Kruzkov entropy, entropy fluxes, and the discrete
//! entropy-inequality residual of a computed trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SblError};
use crate::grid::Field;
use crate::model::{FluxKind, FluxModel};
use crate::noise::BrownianPath;
use crate::quadrature;
use crate::solver::Trajectory;

/// `sup_{|r|<=1} | |r| - profile(r) |` for the fixed profile.
pub const M1: f64 = 5.0 / 16.0;
/// `sup_{|r|<=1} |profile''(r)|` for the fixed profile.
pub const M2: f64 = 15.0 / 8.0;

const QUAD_TOL: f64 = 1e-10;

/// The base profile with `profile''(s) = (15/8)(1 - s^2)^2` on `[-1, 1]` and zero outside:
/// value, first and second derivative.
pub fn profile(r: f64) -> (f64, f64, f64) {
    let a = r.abs();
    if a <= 1.0 {
        let r2 = r * r;
        let v = 15.0 / 8.0 * r2 * (0.5 - r2 / 6.0 + r2 * r2 / 30.0);
        let d1 = 15.0 / 8.0 * r * (1.0 - 2.0 * r2 / 3.0 + r2 * r2 / 5.0);
        let d2 = 15.0 / 8.0 * (1.0 - r2) * (1.0 - r2);
        (v, d1, d2)
    } else {
        (a - M1, r.signum(), 0.0)
    }
}

/// `int_0^r profile`, odd in `r`.
fn profile_antiderivative(r: f64) -> f64 {
    let a = r.abs();
    let h = if a <= 1.0 {
        let a2 = a * a;
        15.0 / 8.0 * a * a2 * (1.0 / 6.0 - a2 / 30.0 + a2 * a2 / 210.0)
    } else {
        // 15/8 (1/6 - 1/30 + 1/210) = 29/112
        29.0 / 112.0 + 0.5 * (a * a - 1.0) - M1 * (a - 1.0)
    };
    h * r.signum()
}

/// The `C^2` approximation `eta_rho(r) = rho * profile(r / rho)` of `|r|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyApprox {
    pub rho: f64,
}

impl EntropyApprox {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(SblError::InvalidArgument(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn m1(&self) -> f64 {
        M1
    }

    pub fn m2(&self) -> f64 {
        M2
    }

    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let (v, d1, d2) = profile(r / self.rho);
        (self.rho * v, d1, d2 / self.rho)
    }
}

/// Value, first and second derivative of `eta_rho` at `r`.
pub fn eta_rho(r: f64, rho: f64) -> Result<(f64, f64, f64)> {
    Ok(EntropyApprox::new(rho)?.eval(r))
}

/// Kruzkov flux `sgn(u - v)(f(u) - f(v))`; every spatial component equals this value.
pub fn kruzkov_flux(u: f64, v: f64, flux: &FluxModel) -> f64 {
    if u == v {
        return 0.0;
    }
    (u - v).signum() * (flux.eval(u) - flux.eval(v))
}

fn flux_breaks(flux: &FluxModel, lo: f64, hi: f64) -> Vec<f64> {
    match flux.kind() {
        FluxKind::Table { u, .. } => u.iter().copied().filter(|&x| x > lo && x < hi).collect(),
        _ => Vec::new(),
    }
}

/// `q(u, v) = int_v^u eta_rho'(xi - v) f'(xi) dxi` by adaptive quadrature.
pub fn entropy_flux_q(u: f64, v: f64, flux: &FluxModel, entropy: &EntropyApprox) -> Result<f64> {
    if u == v {
        return Ok(0.0);
    }
    let mut breaks = flux_breaks(flux, u.min(v), u.max(v));
    breaks.extend([v - entropy.rho, v + entropy.rho]);
    quadrature::integrate_with_breaks(|xi| entropy.eval(xi - v).1 * flux.deriv(xi), v, u, &breaks, QUAD_TOL)
}

/// `d/du [q(u, v) - q(v, u)] = int_u^v eta_rho''(xi - u) (f'(xi) - f'(u)) dxi`.
pub fn entropy_flux_antisymmetry_du(u: f64, v: f64, flux: &FluxModel, entropy: &EntropyApprox) -> Result<f64> {
    if u == v {
        return Ok(0.0);
    }
    let fu = flux.deriv(u);
    let mut breaks = flux_breaks(flux, u.min(v), u.max(v));
    breaks.extend([u - entropy.rho, u + entropy.rho]);
    quadrature::integrate_with_breaks(|xi| entropy.eval(xi - u).2 * (flux.deriv(xi) - fu), u, v, &breaks, QUAD_TOL)
}

/// A convex entropy of the residual's test family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entropy {
    /// `eta_rho(u - k)`
    Kruzkov { rho: f64, k: f64 },
    /// `u^2`
    Square,
    /// `u`
    Linear,
}

impl Entropy {
    pub fn label(&self) -> String {
        match self {
            Entropy::Kruzkov { rho, k } => format!("kruzkov(rho={rho},k={k})"),
            Entropy::Square => "square".into(),
            Entropy::Linear => "linear".into(),
        }
    }

    pub fn eval(&self, u: f64) -> (f64, f64, f64) {
        match *self {
            Entropy::Kruzkov { rho, k } => EntropyApprox { rho }.eval(u - k),
            Entropy::Square => (u * u, 2.0 * u, 2.0),
            Entropy::Linear => (u, 1.0, 0.0),
        }
    }

    /// Entropy flux `q` with `q' = eta' f'`, normalized to vanish at the entropy's base point.
    pub fn flux(&self, u: f64, flux: &FluxModel) -> Result<f64> {
        match (*self, flux.kind()) {
            (Entropy::Linear, _) => Ok(flux.eval(u) - flux.eval(0.0)),
            (Entropy::Square, FluxKind::Burgers) => Ok(2.0 * u * u * u / 3.0),
            (Entropy::Square, FluxKind::Linear { a }) => Ok(a * u * u),
            (Entropy::Square, _) => {
                quadrature::integrate_with_breaks(|x| 2.0 * x * flux.deriv(x), 0.0, u, &flux_breaks(flux, u.min(0.0), u.max(0.0)), QUAD_TOL)
            }
            (Entropy::Kruzkov { rho, k }, FluxKind::Linear { a }) => Ok(a * EntropyApprox { rho }.eval(u - k).0),
            (Entropy::Kruzkov { rho, k }, FluxKind::Burgers) => {
                // int_0^w eta'(s)(s + k) ds = w eta(w) - H(w) + k eta(w), H the antiderivative of eta
                let w = u - k;
                let eta = rho * profile(w / rho).0;
                let big_h = rho * rho * profile_antiderivative(w / rho);
                Ok(w * eta - big_h + k * eta)
            }
            (Entropy::Kruzkov { rho, k }, _) => entropy_flux_q(u, k, flux, &EntropyApprox::new(rho)?),
        }
    }
}

/// Centered-difference gradient component of `phi` along `axis`.
fn centered_gradient(phi: &Field, axis: usize) -> Vec<f64> {
    let g = phi.grid();
    let h = g.spacing(axis);
    let v = phi.values();
    (0..v.len()).map(|i| (v[g.shifted(i, axis, 1)] - v[g.shifted(i, axis, -1)]) / (2.0 * h)).collect()
}

fn node_index(path: &BrownianPath, t: f64) -> Result<usize> {
    let tg = path.time_grid();
    let tol = 1e-9 * path.horizon() / path.steps().max(1) as f64;
    let j = tg.partition_point(|&x| x < t - tol);
    if j < tg.len() && (tg[j] - t).abs() <= tol {
        Ok(j)
    } else {
        Err(SblError::TimeGridMismatch(format!("snapshot time {t} is not a node of the Brownian path")))
    }
}

/// Discrete left side of the stochastic entropy inequality on `[s, t]`.
///
/// Sums `-[int eta(u) phi]_s^t + int int q(u) . grad phi + int int (1/2) eta''(u) sigma^2 phi
/// + sum_steps int eta'(u) sigma(u) phi dW` over consecutive snapshots, with Ito (left-point)
/// evaluation. The snapshots between `s` and `t` must sit on nodes of `path`. A nonnegative
/// value means the inequality holds for this sample path and test function.
pub fn entropy_residual(
    traj: &Trajectory,
    path: &BrownianPath,
    entropy: &Entropy,
    testfn: &Field,
    s: f64,
    t: f64,
) -> Result<f64> {
    if !(s < t) {
        return Err(SblError::InvalidArgument(format!("need s < t, got s = {s}, t = {t}")));
    }
    if let Some((cell, &value)) = testfn.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(SblError::NegativeTestFunction { cell, value });
    }
    if testfn.grid() != traj.grid() {
        return Err(SblError::InvalidArgument("test function lives on a different grid".into()));
    }
    let tol = 1e-9 * traj.problem.horizon;
    let window: Vec<_> = traj.snapshots.iter().filter(|sn| sn.time >= s - tol && sn.time <= t + tol).collect();
    if window.len() < 2 || (window[0].time - s).abs() > tol || (window[window.len() - 1].time - t).abs() > tol {
        return Err(SblError::TimeGridMismatch(format!("snapshots do not cover [{s}, {t}]")));
    }
    let grid = *traj.grid();
    let vol = grid.cell_volume();
    let phi = testfn.values();
    let grads: Vec<Vec<f64>> = (0..grid.dim()).map(|a| centered_gradient(testfn, a)).collect();
    let grad_sum: Vec<f64> = (0..phi.len()).map(|i| grads.iter().map(|g| g[i]).sum()).collect();
    let noise = &traj.problem.noise;
    let flux = &traj.problem.flux;
    let modes = noise.modes();
    let x_dep = noise.depends_on_x();
    let wvals: Vec<Vec<f64>> = (0..modes).map(|k| path.values(k)).collect();

    let weighted_entropy = |u: &Field| -> f64 { u.values().iter().zip(phi).map(|(&u, &p)| entropy.eval(u).0 * p).sum::<f64>() * vol };
    let mut residual = -(weighted_entropy(&window[window.len() - 1].field) - weighted_entropy(&window[0].field));

    for pair in window.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let dt = b.time - a.time;
        let (ja, jb) = (node_index(path, a.time)?, node_index(path, b.time)?);
        let (mut drift, mut ito, mut mart) = (0.0, 0.0, 0.0);
        for (i, &u) in a.field.values().iter().enumerate() {
            let (_, d1, d2) = entropy.eval(u);
            if grad_sum[i] != 0.0 {
                drift += entropy.flux(u, flux)? * grad_sum[i];
            }
            if !noise.is_zero() && phi[i] != 0.0 {
                let x = if x_dep { grid.coords(i)[0] } else { 0.0 };
                let sig = noise.sigma(x, u);
                ito += 0.5 * d2 * sig * sig * phi[i];
                mart += d1 * noise.sigma_mode(x, u) * phi[i];
            }
        }
        let dw: f64 = if noise.is_zero() { 0.0 } else { wvals.iter().map(|w| w[jb] - w[ja]).sum() };
        residual += (drift + ito) * dt * vol + mart * dw * vol;
    }
    Ok(residual)
}
