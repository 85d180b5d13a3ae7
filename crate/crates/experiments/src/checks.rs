//! Deterministic property checks of the entropy approximation.

use sbl_core::entropy::{entropy_flux_antisymmetry_du, eta_rho, profile, EntropyApprox, M1, M2};
use sbl_core::{FluxKind, FluxModel, Result};

/// Largest observed violation of one property, with the tolerance it is held to.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub violation: f64,
    pub tolerance: f64,
}

impl PropertyCheck {
    pub fn holds(&self) -> bool {
        self.violation <= self.tolerance
    }
}

pub const RHO_GRID: [f64; 5] = [0.01, 0.05, 0.2, 0.5, 1.0];

/// Sandwich, curvature support, `C^2` continuity, the profile constants, and the
/// antisymmetry-derivative bound on a sampled `(u, v, rho)` grid.
pub fn entropy_property_suite() -> Result<Vec<PropertyCheck>> {
    let mut sandwich: f64 = 0.0;
    let mut curvature: f64 = 0.0;
    for &rho in &RHO_GRID {
        for i in 0..=4000 {
            let r = -4.0 + 8.0 * i as f64 / 4000.0;
            let (v, _, d2) = eta_rho(r, rho)?;
            sandwich = sandwich.max(v - r.abs()).max(r.abs() - M1 * rho - v);
            curvature = curvature.max(if r.abs() >= rho { d2.abs() } else { d2 - M2 / rho });
        }
    }

    let mut jump: f64 = 0.0;
    for &rho in &RHO_GRID {
        for edge in [-rho, rho] {
            // one-sided values a distance `tau` from the edge, less the drift over `2 tau`
            let tau = 1e-12 * rho;
            let a = eta_rho(edge - tau, rho)?;
            let b = eta_rho(edge + tau, rho)?;
            let drift1 = 2.0 * tau * a.1.abs().max(b.1.abs());
            let drift2 = 2.0 * tau * a.2.abs().max(b.2.abs());
            jump = jump.max((a.0 - b.0).abs() - drift1).max((a.1 - b.1).abs() - drift2).max((a.2 - b.2).abs());
        }
    }

    let mut m1: f64 = 0.0;
    let mut m2: f64 = 0.0;
    for i in 0..=20000 {
        let r = -1.0 + 2.0 * i as f64 / 20000.0;
        let (v, _, d2) = profile(r);
        m1 = m1.max(r.abs() - v);
        m2 = m2.max(d2.abs());
    }

    let fluxes = [
        FluxModel::burgers(),
        FluxModel::new(FluxKind::Polynomial { coefficients: vec![0.0, 0.3, -0.4, 0.2] })?,
    ];
    let mut antisym: f64 = 0.0;
    for f in &fluxes {
        let fpp = f.max_abs_second(-3.0, 3.0);
        for &rho in &RHO_GRID {
            let e = EntropyApprox::new(rho)?;
            for i in 0..=12 {
                for j in 0..=12 {
                    let (u, v) = (-1.5 + 0.25 * i as f64, -1.5 + 0.25 * j as f64);
                    let d = entropy_flux_antisymmetry_du(u, v, f, &e)?;
                    antisym = antisym.max(d.abs() - 0.5 * M2 * fpp * rho);
                }
            }
        }
    }

    Ok(vec![
        PropertyCheck { name: "sandwich", violation: sandwich, tolerance: 1e-12 },
        PropertyCheck { name: "curvature_support", violation: curvature, tolerance: 1e-12 },
        PropertyCheck { name: "c2_continuity", violation: jump, tolerance: 1e-12 },
        PropertyCheck { name: "m1", violation: (m1 - 5.0 / 16.0).abs(), tolerance: 1e-12 },
        PropertyCheck { name: "m2", violation: (m2 - 15.0 / 8.0).abs(), tolerance: 1e-12 },
        PropertyCheck { name: "antisymmetry_bound", violation: antisym, tolerance: 1e-8 },
    ])
}
