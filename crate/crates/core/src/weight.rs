//! Spatial weight functions `psi` used by the weighted L1 functionals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SblError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFunction {
    /// `psi(x) = exp(-c0 |x|)`
    Exponential { c0: f64 },
    /// `psi = 1` on `|x| <= r`, then `exp(-c0 (|x| - r))`.
    Truncated { c0: f64, r: f64 },
    /// `W^{2,inf}` cutoff: 1 on `|x| <= r`, a damped sine on `r <= |x| <= r + pi`, 0 beyond.
    Section6 { r: f64 },
    One,
}

/// Minimal distance kept from the zero set of `psi` by [`check_weight_inequalities`].
pub const ZERO_SET_MARGIN: f64 = 0.1;

impl WeightFunction {
    /// Value and first two derivatives in the radial variable `t = |x|`.
    fn radial(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            WeightFunction::One => (1.0, 0.0, 0.0),
            WeightFunction::Exponential { c0 } => {
                let v = (-c0 * t).exp();
                (v, -c0 * v, c0 * c0 * v)
            }
            WeightFunction::Truncated { c0, r } => {
                if t <= r {
                    (1.0, 0.0, 0.0)
                } else {
                    let v = (-c0 * (t - r)).exp();
                    (v, -c0 * v, c0 * c0 * v)
                }
            }
            WeightFunction::Section6 { r } => {
                if t <= r {
                    (1.0, 0.0, 0.0)
                } else if t >= r + PI {
                    (0.0, 0.0, 0.0)
                } else {
                    let s = t - r;
                    let norm = 1.0 / (PI.exp() + 1.0);
                    let e = (PI - s).exp();
                    let v = norm * (std::f64::consts::SQRT_2 * e * (s + PI / 4.0).sin() + 1.0);
                    (v, -2.0 * norm * e * s.sin(), 2.0 * norm * e * (s.sin() - s.cos()))
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.radial(x.abs()).0
    }

    /// Exact first derivative away from the kinks.
    pub fn derivative(&self, x: f64) -> f64 {
        self.radial(x.abs()).1 * x.signum()
    }

    pub fn sup(&self) -> f64 {
        1.0
    }

    /// `|x|` values where `psi` fails to be twice differentiable.
    fn kinks(&self) -> Vec<f64> {
        match *self {
            WeightFunction::One => vec![],
            WeightFunction::Exponential { .. } => vec![0.0],
            WeightFunction::Truncated { r, .. } => vec![r],
            WeightFunction::Section6 { r } => vec![r, r + PI],
        }
    }

    /// Inner radius of the zero set, if `psi` has compact support.
    pub fn zero_set_radius(&self) -> Option<f64> {
        match *self {
            WeightFunction::Section6 { r } => Some(r + PI),
            _ => None,
        }
    }
}

/// Evaluates `psi(x)`.
pub fn weight_eval(w: &WeightFunction, x: f64) -> f64 {
    w.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightCheck {
    pub holds: bool,
    /// Largest sampled `|psi'| / psi`.
    pub max_ratio_first: f64,
    /// Largest sampled `|psi''| / psi`.
    pub max_ratio_second: f64,
}

impl WeightCheck {
    pub fn max_ratio(&self) -> f64 {
        self.max_ratio_first.max(self.max_ratio_second)
    }
}

/// Checks `|psi'| <= c0 psi` and `|psi''| <= c0 psi` by central differences on `region`.
///
/// Difference stencils never straddle a kink of `psi`; the region must stay
/// [`ZERO_SET_MARGIN`] away from the zero set.
pub fn check_weight_inequalities(w: &WeightFunction, c0: f64, region: (f64, f64)) -> Result<WeightCheck> {
    let (a, b) = (region.0.min(region.1), region.0.max(region.1));
    if let Some(z) = w.zero_set_radius() {
        if a.abs().max(b.abs()) > z - ZERO_SET_MARGIN {
            return Err(SblError::DegenerateRegion(format!(
                "region [{a}, {b}] comes within {ZERO_SET_MARGIN} of the zero set |x| >= {z}"
            )));
        }
    }
    let kinks: Vec<f64> = w.kinks().into_iter().flat_map(|k| [k, -k]).collect();
    let n = 20_000;
    let (mut r1, mut r2) = (0.0_f64, 0.0_f64);
    for i in 0..n {
        let x = a + (b - a) * (i as f64 + 0.5) / n as f64;
        let gap = kinks.iter().map(|k| (x - k).abs()).fold(f64::INFINITY, f64::min);
        let s = (1e-4_f64).min(0.5 * gap);
        if s < 1e-7 {
            continue;
        }
        let (fm, f0, fp) = (w.eval(x - s), w.eval(x), w.eval(x + s));
        if f0 <= 0.0 {
            return Err(SblError::DegenerateRegion(format!("psi vanishes at x = {x}")));
        }
        let d1 = (fp - fm) / (2.0 * s);
        let d2 = (fp - 2.0 * f0 + fm) / (s * s);
        r1 = r1.max(d1.abs() / f0);
        r2 = r2.max(d2.abs() / f0);
    }
    Ok(WeightCheck { holds: r1 <= c0 && r2 <= c0, max_ratio_first: r1, max_ratio_second: r2 })
}
