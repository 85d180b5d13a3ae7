use proptest::prelude::*;

use sbl_core::besov::{builtin_corpus, modulus_omega, mollify, SampledFunction};
use sbl_core::entropy::{eta_rho, kruzkov_flux, M1, M2};
use sbl_core::estimators::{besov_dual_modulus, bv_seminorm, lp_norm, translation_modulus, Norm};
use sbl_core::noise::{sample_path, uniform_grid};
use sbl_core::solver::{numerical_flux, FluxScheme};
use sbl_core::{Field, FluxModel, Grid, NoiseModel, WeightFunction};

fn field_1d(max: usize) -> impl Strategy<Value = Field> {
    (8usize..max).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n).prop_map(move |v| Field::new(Grid::new_1d(n, 3.0).unwrap(), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn norms_agree_with_naive_sums(u in field_1d(80)) {
        let h = u.grid().spacing(0);
        let v = u.values();
        let n = v.len();
        let mut tv = 0.0;
        for i in 0..n {
            tv += (v[(i + 1) % n] - v[i]).abs();
        }
        prop_assert!((bv_seminorm(&u) - tv).abs() <= 1e-12 * (1.0 + tv));
        let l1: f64 = v.iter().map(|x| x.abs() * h).sum();
        let l2: f64 = v.iter().map(|x| x * x * h).sum::<f64>().sqrt();
        let l3: f64 = v.iter().map(|x| x.abs().powi(3) * h).sum::<f64>().cbrt();
        let linf = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!((lp_norm(&u, Norm::L(1)).unwrap() - l1).abs() <= 1e-12 * (1.0 + l1));
        prop_assert!((lp_norm(&u, Norm::L(2)).unwrap() - l2).abs() <= 1e-12 * (1.0 + l2));
        prop_assert!((lp_norm(&u, Norm::L(3)).unwrap() - l3).abs() <= 1e-12 * (1.0 + l3));
        prop_assert_eq!(lp_norm(&u, Norm::Inf).unwrap(), linf);
    }

    #[test]
    fn translation_modulus_is_monotone(u in field_1d(64), a in 0.0f64..1.5, b in 0.0f64..1.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let psi = WeightFunction::Exponential { c0: 0.7 };
        prop_assert!(translation_modulus(&u, lo, &psi).unwrap() <= translation_modulus(&u, hi, &psi).unwrap());
    }

    #[test]
    fn dual_modulus_below_symmetric_translation_bound(u in field_1d(96), m in 2usize..10) {
        let h = u.grid().spacing(0);
        let delta = m as f64 * h;
        let psi = WeightFunction::Truncated { c0: 1.0, r: 0.5 };
        let dual = besov_dual_modulus(&u, delta, &psi).unwrap();
        let v = u.values();
        let n = v.len();
        let w: Vec<f64> = (0..n).map(|i| psi.eval((i as f64 + 0.5) * h - 1.5)).collect();
        let mut sup: f64 = 0.0;
        for k in 1..=m {
            let s: f64 = (0..n).map(|i| (v[(i + k) % n] - v[(i + n * 2 - k) % n]).abs() * w[i] * h).sum();
            sup = sup.max(s);
        }
        prop_assert!(dual <= psi.sup() * sup + 1e-12);
    }

    #[test]
    fn eta_rho_sandwich_and_curvature_bound(r in -20.0f64..20.0, rho in 1e-3f64..5.0) {
        let (v, d1, d2) = eta_rho(r, rho).unwrap();
        prop_assert!(v <= r.abs() + 1e-15);
        prop_assert!(v >= r.abs() - M1 * rho - 1e-12);
        prop_assert!(d1.abs() <= 1.0 + 1e-15);
        prop_assert!(d2 >= 0.0 && d2 <= M2 / rho + 1e-12);
        if r.abs() >= rho {
            prop_assert_eq!(d2, 0.0);
        }
    }

    #[test]
    fn kruzkov_flux_is_symmetric(u in -10.0f64..10.0, v in -10.0f64..10.0) {
        let f = FluxModel::burgers();
        prop_assert_eq!(kruzkov_flux(u, v, &f), kruzkov_flux(v, u, &f));
    }

    #[test]
    fn numerical_fluxes_are_consistent_and_monotone(u in -3.0f64..3.0, a in -3.0f64..3.0, d in 0.0f64..0.5) {
        for scheme in [FluxScheme::LocalLaxFriedrichs, FluxScheme::EngquistOsher] {
            let f = FluxModel::burgers();
            prop_assert!((numerical_flux(u, u, &f, scheme) - f.eval(u)).abs() < 1e-13);
            prop_assert!(numerical_flux(u + d, a, &f, scheme) >= numerical_flux(u, a, &f, scheme) - 1e-13);
            prop_assert!(numerical_flux(a, u + d, &f, scheme) <= numerical_flux(a, u, &f, scheme) + 1e-13);
        }
    }

    #[test]
    fn noise_vanishes_at_zero_state(x in -100.0f64..100.0, lambda in -2.0f64..2.0, mu in -1.0f64..1.0) {
        for m in [NoiseModel::linear(lambda), NoiseModel::sine(lambda), NoiseModel::x_modulated(lambda, mu)] {
            prop_assert_eq!(m.sigma(x, 0.0), 0.0);
        }
    }

    #[test]
    fn refinement_keeps_coarse_values(seed in any::<u64>(), steps in 1usize..40) {
        let p = sample_path(seed, 2, &uniform_grid(1.0, steps)).unwrap();
        let r = p.refine().unwrap();
        for k in 0..2 {
            let (wc, wf) = (p.values(k), r.values(k));
            for j in 0..=steps {
                prop_assert!((wc[j] - wf[2 * j]).abs() <= 1e-12 * (1 + j) as f64);
            }
        }
    }

    #[test]
    fn mollify_keeps_mass(v in prop::collection::vec(-3.0f64..3.0, 128), m in 2usize..12) {
        let f = SampledFunction::from_samples("r", v, 4.0).unwrap();
        let g = mollify(&f, m as f64 * f.spacing()).unwrap();
        let (a, b): (f64, f64) = (f.samples().iter().sum(), g.samples().iter().sum());
        prop_assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn omega_is_subadditive_on_the_corpus() {
    let corpus = builtin_corpus(256).unwrap();
    let h = corpus[0].spacing();
    let psi = WeightFunction::One;
    for f in &corpus {
        for a in 1..12 {
            for b in 1..12 {
                let (da, db) = (a as f64 * h, b as f64 * h);
                let lhs = modulus_omega(f, da + db, &psi).unwrap();
                let rhs = modulus_omega(f, da, &psi).unwrap() + modulus_omega(f, db, &psi).unwrap();
                assert!(lhs <= rhs + 1e-12, "{}: omega({a}h + {b}h)", f.label);
            }
        }
    }
}
