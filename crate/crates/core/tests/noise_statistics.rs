use sbl_core::estimators::{mc_expectation_multi, Execution};
use sbl_core::noise::{normals, sample_path, uniform_grid};
use sbl_core::SblError;

fn w1(seed: u64) -> f64 {
    let p = sample_path(seed, 1, &uniform_grid(1.0, 10)).unwrap();
    p.increments().iter().sum()
}

#[test]
fn terminal_variance_is_one() {
    let n = 100_000u64;
    let samples: Vec<f64> = (0..n).map(w1).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
    assert!((0.99..=1.01).contains(&var), "variance {var}");
}

#[test]
fn bridge_midpoint_has_quarter_variance() {
    let dt = 0.3;
    let n = 100_000usize;
    let p = sample_path(77, 1, &uniform_grid(dt * n as f64, n)).unwrap();
    let r = p.refine().unwrap();
    // deviation of the left half from the conditional mean dw/2
    let dev: Vec<f64> = (0..n).map(|j| r.increment(0, 2 * j) - 0.5 * p.increment(0, j)).collect();
    let var = dev.iter().map(|d| d * d).sum::<f64>() / n as f64;
    assert!((var / (dt / 4.0) - 1.0).abs() < 0.02, "bridge variance {var}");
}

#[test]
fn distinct_seeds_are_uncorrelated() {
    let n = 10_000u64;
    let (a, b): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (w1(2 * i), w1(2 * i + 1))).unzip();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let rho = cov / (va * vb).sqrt();
    assert!(rho.abs() < 0.05, "correlation {rho}");
}

#[test]
fn modes_are_independent_streams() {
    let z0 = normals(3, 0, 0, 0, 5000);
    let z1 = normals(3, 1, 0, 0, 5000);
    let c: f64 = z0.iter().zip(&z1).map(|(a, b)| a * b).sum::<f64>() / 5000.0;
    assert!(c.abs() < 0.06);
    assert_ne!(normals(3, 0, 1, 0, 4), normals(3, 0, 0, 0, 4));
}

#[test]
fn parallel_and_sequential_statistics_agree() {
    let stat = |seed: u64| -> Result<Vec<f64>, SblError> {
        let p = sample_path(seed, 2, &uniform_grid(1.0, 32))?;
        let r = p.refine()?;
        Ok(vec![r.values(0)[64], r.values(1)[17]])
    };
    let par = mc_expectation_multi(&["w0", "w1"], 500, 1000, Execution::Parallel, stat).unwrap();
    let seq = mc_expectation_multi(&["w0", "w1"], 500, 1000, Execution::Sequential, stat).unwrap();
    assert_eq!(par, seq);
}

#[test]
fn mc_mean_of_terminal_value_is_zero() {
    let r = sbl_core::estimators::mc_expectation("W(1)", 10_000, 0, |s| Ok::<f64, SblError>(w1(s))).unwrap();
    assert!(r.mean.abs() <= 3.0 * r.stderr, "{} +- {}", r.mean, r.stderr);
    let again = sbl_core::estimators::mc_expectation("W(1)", 10_000, 0, |s| Ok::<f64, SblError>(w1(s))).unwrap();
    assert_eq!(r, again);
}
