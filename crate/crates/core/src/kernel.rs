//! The standard `C_c^inf` mollifier and its discrete, unit-mass samplings.

use std::sync::OnceLock;

use crate::error::{Result, SblError};
use crate::quadrature;

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 / (x * x - 1.0)).exp()
    } else {
        0.0
    }
}

/// Normalizing constant `C` so that `J` integrates to one on the line.
pub fn mollifier_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let mass = quadrature::integrate(bump, -1.0, 1.0, 1e-15).expect("bump integrates");
        1.0 / mass
    })
}

/// `J(x) = C exp(1 / (x^2 - 1))` on `|x| < 1`, zero elsewhere.
pub fn mollifier(x: f64) -> f64 {
    mollifier_constant() * bump(x)
}

/// `J_delta(z) = J(|z| / delta) / delta`.
pub fn mollifier_scaled(z: f64, delta: f64) -> f64 {
    mollifier(z / delta) / delta
}

/// A symmetric kernel on integer cell offsets `-radius..=radius`.
///
/// Weights are cell integrals of `J_delta` renormalized to unit discrete mass, so that
/// sums against cell-average data reproduce continuous convolutions of piecewise-constant data.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    pub delta: f64,
    pub spacing: f64,
    weights: Vec<f64>,
}

impl DiscreteKernel {
    /// Samples `J_delta` on cells of width `spacing`; requires `delta >= min_ratio * spacing`.
    pub fn new(delta: f64, spacing: f64, min_ratio: f64) -> Result<Self> {
        if !(delta.is_finite() && spacing > 0.0) || delta < min_ratio * spacing * (1.0 - 1e-12) {
            return Err(SblError::KernelUnderResolved { delta, spacing });
        }
        let radius = (delta / spacing + 0.5).floor() as usize;
        let mut weights = Vec::with_capacity(2 * radius + 1);
        for m in -(radius as isize)..=radius as isize {
            let lo = ((m as f64 - 0.5) * spacing).max(-delta);
            let hi = ((m as f64 + 0.5) * spacing).min(delta);
            let w = if hi > lo {
                quadrature::integrate(|z| mollifier_scaled(z, delta), lo, hi, 1e-14)?
            } else {
                0.0
            };
            weights.push(w);
        }
        let mass: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= mass);
        // enforce exact symmetry after normalization
        let n = weights.len();
        for k in 0..n / 2 {
            let avg = 0.5 * (weights[k] + weights[n - 1 - k]);
            weights[k] = avg;
            weights[n - 1 - k] = avg;
        }
        Ok(Self { delta, spacing, weights })
    }

    pub fn radius(&self) -> usize {
        self.weights.len() / 2
    }

    /// Weight of offset `m` (in cells).
    pub fn weight(&self, m: isize) -> f64 {
        let r = self.radius() as isize;
        if m.abs() > r {
            0.0
        } else {
            self.weights[(m + r) as usize]
        }
    }

    /// `(offset, weight)` pairs with nonzero weight.
    pub fn taps(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        let r = self.radius() as isize;
        self.weights.iter().enumerate().map(move |(i, &w)| (i as isize - r, w)).filter(|(_, w)| *w != 0.0)
    }

    /// Discrete mean of `|z|` under the kernel.
    pub fn mean_abs_offset(&self) -> f64 {
        self.taps().map(|(m, w)| w * m.unsigned_abs() as f64 * self.spacing).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_has_unit_mass() {
        let m = quadrature::integrate(mollifier, -1.0, 1.0, 1e-14).unwrap();
        assert!((m - 1.0).abs() < 1e-13);
        // reference value of the unnormalized bump integral
        assert!((1.0 / mollifier_constant() - 0.443_993_816_168_079_4).abs() < 1e-12);
    }

    #[test]
    fn discrete_kernel_is_symmetric_with_unit_mass() {
        let k = DiscreteKernel::new(0.3, 0.01, 2.0).unwrap();
        let total: f64 = k.taps().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        for m in 0..=k.radius() as isize {
            assert_eq!(k.weight(m), k.weight(-m));
        }
        assert_eq!(k.radius(), 30);
    }

    #[test]
    fn under_resolved_kernel_is_rejected() {
        assert!(matches!(DiscreteKernel::new(0.015, 0.01, 2.0), Err(SblError::KernelUnderResolved { .. })));
        assert!(DiscreteKernel::new(0.02, 0.01, 2.0).is_ok());
    }

    #[test]
    fn mean_abs_offset_converges() {
        let c_j = 2.0 * quadrature::integrate(|z| z * mollifier(z), 0.0, 1.0, 1e-14).unwrap();
        let k = DiscreteKernel::new(1.0, 1.0 / 256.0, 2.0).unwrap();
        assert!((k.mean_abs_offset() - c_j).abs() < 1e-3);
    }
}
