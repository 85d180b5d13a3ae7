//! Discrete norms, seminorms and translation moduli, Monte Carlo aggregation, and
//! log-log rate fits.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SblError};
use crate::grid::{Field, Grid};
use crate::kernel::DiscreteKernel;
use crate::solver::Trajectory;
use crate::weight::WeightFunction;

/// Total variation `sum_axes sum_cells |u_{j+1} - u_j| h^{d-1}` with periodic wraparound.
pub fn bv_seminorm(u: &Field) -> f64 {
    let g = u.grid();
    let v = u.values();
    let mut tv = 0.0;
    for axis in 0..g.dim() {
        let face = g.cell_volume() / g.spacing(axis);
        let s: f64 = (0..v.len()).map(|i| (v[g.shifted(i, axis, 1)] - v[i]).abs()).sum();
        tv += s * face;
    }
    tv
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Norm {
    L(u32),
    Inf,
}

pub fn lp_norm(u: &Field, p: Norm) -> Result<f64> {
    let vol = u.grid().cell_volume();
    match p {
        Norm::Inf => Ok(u.values().iter().fold(0.0, |m, v| m.max(v.abs()))),
        Norm::L(0) => Err(SblError::InvalidArgument("p must be >= 1".into())),
        Norm::L(1) => Ok(u.values().iter().map(|v| v.abs()).sum::<f64>() * vol),
        Norm::L(2) => Ok((u.values().iter().map(|v| v * v).sum::<f64>() * vol).sqrt()),
        Norm::L(p) => {
            let s: f64 = u.values().iter().map(|v| v.abs().powi(p as i32)).sum::<f64>() * vol;
            Ok(s.powf(1.0 / p as f64))
        }
    }
}

/// `int |u - v|`.
pub fn l1_distance(u: &Field, v: &Field) -> Result<f64> {
    lp_norm(&u.sub(v)?, Norm::L(1))
}

/// `int (u - v)^+`.
pub fn l1_positive_part(u: &Field, v: &Field) -> Result<f64> {
    let d = u.sub(v)?;
    Ok(d.values().iter().map(|x| x.max(0.0)).sum::<f64>() * d.grid().cell_volume())
}

/// Time average over `window` of `int |u(t + dt) - u(t)|` taken over snapshot pairs.
///
/// Snapshots must be uniformly spaced and `dt` an integer multiple of the spacing.
pub fn temporal_l1_modulus(traj: &Trajectory, dt: f64, window: (f64, f64)) -> Result<f64> {
    if dt == 0.0 {
        return Ok(0.0);
    }
    let snaps = &traj.snapshots;
    if snaps.len() < 2 {
        return Err(SblError::InvalidArgument("need at least two snapshots".into()));
    }
    let spacing = snaps[1].time - snaps[0].time;
    let ratio = dt / spacing;
    let k = ratio.round();
    if !(dt > 0.0) || k < 1.0 || (ratio - k).abs() > 1e-6 {
        return Err(SblError::InvalidArgument(format!(
            "dt = {dt} is not a multiple of the snapshot spacing {spacing}"
        )));
    }
    let k = k as usize;
    let tol = 1e-9 * spacing;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..snaps.len().saturating_sub(k) {
        let t = snaps[i].time;
        if t < window.0 - tol || t > window.1 + tol {
            continue;
        }
        if ((snaps[i + k].time - t) - dt).abs() > 1e-6 * spacing {
            return Err(SblError::InvalidArgument("snapshots are not uniformly spaced".into()));
        }
        sum += l1_distance(&snaps[i + k].field, &snaps[i].field)?;
        count += 1;
    }
    if count == 0 {
        return Err(SblError::InvalidArgument(format!("no snapshot pair in window [{}, {}]", window.0, window.1)));
    }
    Ok(sum / count as f64)
}

/// `psi` at every cell, measured from the domain center.
pub fn weight_values(grid: &Grid, psi: &WeightFunction) -> Vec<f64> {
    if matches!(psi, WeightFunction::One) {
        return vec![1.0; grid.total_cells()];
    }
    (0..grid.total_cells())
        .map(|i| {
            let c = grid.coords(i);
            let r2: f64 = (0..grid.dim()).map(|a| (c[a] - 0.5 * grid.length(a)).powi(2)).sum();
            psi.eval(r2.sqrt())
        })
        .collect()
}

/// Integer cell shifts `(m0, m1)` with `|z| <= delta`, excluding zero.
fn admissible_shifts(grid: &Grid, delta: f64) -> Vec<(isize, isize)> {
    let mut out = Vec::new();
    let h0 = grid.spacing(0);
    let r0 = (delta / h0 * (1.0 + 1e-12)).floor() as isize;
    let (h1, r1) = if grid.dim() == 2 {
        (grid.spacing(1), (delta / grid.spacing(1) * (1.0 + 1e-12)).floor() as isize)
    } else {
        (1.0, 0)
    };
    for m1 in -r1..=r1 {
        for m0 in -r0..=r0 {
            if (m0, m1) == (0, 0) {
                continue;
            }
            let z2 = (m0 as f64 * h0).powi(2) + (m1 as f64 * h1).powi(2);
            if z2.sqrt() <= delta * (1.0 + 1e-12) {
                out.push((m0, m1));
            }
        }
    }
    out
}

fn shift_index(grid: &Grid, idx: usize, m: (isize, isize)) -> usize {
    let j = grid.shifted(idx, 0, m.0);
    if m.1 != 0 {
        grid.shifted(j, 1, m.1)
    } else {
        j
    }
}

/// `sum_x |u(x + a) - u(x + b)| w(x) h^d` for cell shifts `a` and `b`.
pub(crate) fn shifted_l1(u: &Field, a: (isize, isize), b: (isize, isize), weights: &[f64]) -> f64 {
    let g = u.grid();
    let v = u.values();
    let s: f64 = (0..v.len())
        .map(|i| (v[shift_index(g, i, a)] - v[shift_index(g, i, b)]).abs() * weights[i])
        .sum();
    s * g.cell_volume()
}

/// `max_{|z| <= delta} sum |u(x + z) - u(x)| psi(x) h^d` over whole-cell shifts.
pub fn translation_modulus(u: &Field, delta: f64, psi: &WeightFunction) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(SblError::InvalidArgument(format!("delta must be >= 0, got {delta}")));
    }
    let w = weight_values(u.grid(), psi);
    Ok(admissible_shifts(u.grid(), delta)
        .into_iter()
        .map(|m| shifted_l1(u, m, (0, 0), &w))
        .fold(0.0, f64::max))
}

/// Discrete `int int |u(x + z) - u(x - z)| J_delta(z) psi(x) dx dz` with the standard mollifier.
///
/// In one dimension the kernel weights are cell integrals of `J_delta`; in two dimensions the
/// radial kernel is sampled at cell offsets. Both are renormalized to unit mass.
pub fn besov_dual_modulus(u: &Field, delta: f64, psi: &WeightFunction) -> Result<f64> {
    let g = u.grid();
    let w = weight_values(g, psi);
    let taps = kernel_taps(g, delta)?;
    Ok(taps
        .into_iter()
        .filter(|(m, _)| *m != (0, 0))
        .map(|(m, wt)| wt * shifted_l1(u, m, (-m.0, -m.1), &w))
        .sum())
}

pub(crate) fn kernel_taps(g: &Grid, delta: f64) -> Result<Vec<((isize, isize), f64)>> {
    if !(delta >= 2.0 * g.min_spacing() * (1.0 - 1e-12)) {
        return Err(SblError::KernelUnderResolved { delta, spacing: g.min_spacing() });
    }
    if g.dim() == 1 {
        let k = DiscreteKernel::new(delta, g.spacing(0), 2.0)?;
        return Ok(k.taps().map(|(m, w)| ((m, 0), w)).collect());
    }
    let (h0, h1) = (g.spacing(0), g.spacing(1));
    let (r0, r1) = ((delta / h0).floor() as isize, (delta / h1).floor() as isize);
    let mut taps = Vec::new();
    for m1 in -r1..=r1 {
        for m0 in -r0..=r0 {
            let z = ((m0 as f64 * h0).powi(2) + (m1 as f64 * h1).powi(2)).sqrt();
            let wt = crate::kernel::mollifier(z / delta);
            if wt > 0.0 {
                taps.push(((m0, m1), wt));
            }
        }
    }
    let mass: f64 = taps.iter().map(|t| t.1).sum();
    taps.iter_mut().for_each(|t| t.1 /= mass);
    Ok(taps)
}

/// Monte Carlo statistic of one functional over `paths` sample paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub per_path: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    pub seed_base: u64,
    /// `(seed, message)` of paths that failed and were excluded.
    #[serde(default)]
    pub failures: Vec<(u64, String)>,
}

impl EstimateReport {
    pub fn from_values(name: impl Into<String>, per_path: Vec<f64>, seed_base: u64) -> Self {
        let n = per_path.len();
        let mean = per_path.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            per_path.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            name: name.into(),
            paths: n,
            mean,
            stderr: (var / n as f64).sqrt(),
            per_path,
            seed_base,
            failures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// Largest tolerated fraction of failed paths.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// Runs a vector-valued per-path functional on seeds `seed_base + i`, `i < paths`.
///
/// Returns one report per component. Failed paths are dropped from every component and
/// recorded; more than [`MAX_FAILURE_FRACTION`] failures abort the estimate.
pub fn mc_expectation_multi<F, E>(
    names: &[&str],
    paths: usize,
    seed_base: u64,
    exec: Execution,
    statistic: F,
) -> Result<Vec<EstimateReport>>
where
    F: Fn(u64) -> std::result::Result<Vec<f64>, E> + Sync,
    E: std::fmt::Display,
{
    if paths < 2 {
        return Err(SblError::InvalidArgument(format!("need at least 2 paths, got {paths}")));
    }
    let run = |i: usize| {
        let seed = seed_base.wrapping_add(i as u64);
        (seed, statistic(seed).map_err(|e| e.to_string()))
    };
    let results: Vec<(u64, std::result::Result<Vec<f64>, String>)> = match exec {
        Execution::Parallel => (0..paths).into_par_iter().map(run).collect(),
        Execution::Sequential => (0..paths).map(run).collect(),
    };
    let mut columns = vec![Vec::with_capacity(paths); names.len()];
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(v) if v.len() == names.len() && v.iter().all(|x| x.is_finite()) => {
                for (c, x) in columns.iter_mut().zip(v) {
                    c.push(x);
                }
            }
            Ok(v) => failures.push((seed, format!("statistic returned {} finite-checked values", v.len()))),
            Err(e) => failures.push((seed, e)),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * paths as f64 || columns.first().is_some_and(|c| c.len() < 2) {
        return Err(SblError::TooManyFailures { name: names.join(","), failed: failures.len(), total: paths });
    }
    Ok(names
        .iter()
        .zip(columns)
        .map(|(name, col)| {
            let mut r = EstimateReport::from_values(*name, col, seed_base);
            r.failures = failures.clone();
            r
        })
        .collect())
}

/// Scalar version of [`mc_expectation_multi`].
pub fn mc_expectation<F, E>(name: &str, paths: usize, seed_base: u64, statistic: F) -> Result<EstimateReport>
where
    F: Fn(u64) -> std::result::Result<f64, E> + Sync,
    E: std::fmt::Display,
{
    let mut v = mc_expectation_multi(&[name], paths, seed_base, Execution::Parallel, |s| statistic(s).map(|x| vec![x]))?;
    Ok(v.remove(0))
}

/// Least-squares line through `(log scale, log value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(SblError::TooFewScales { required: 3, got: points.len() });
    }
    if let Some(&(scale, value)) = points.iter().find(|(s, v)| !(*s > 0.0 && *v > 0.0)) {
        return Err(SblError::NonPositiveFitPoint { scale, value });
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SblError::InvalidArgument("rate fit needs distinct scales".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(RateFit { points: points.to_vec(), slope, intercept, r_squared })
}

pub const SUMMARY_CSV_HEADER: &str = "name,M,mean,stderr,slope,r_squared";

/// Appends `name,M,mean,stderr,slope,r_squared` (fit columns empty when absent),
/// writing the header first when `out` is empty.
pub fn append_summary_row(
    path: &std::path::Path,
    report: &EstimateReport,
    fit: Option<&RateFit>,
) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{SUMMARY_CSV_HEADER}")?;
    }
    let (slope, r2) = fit.map(|f| (format!("{:e}", f.slope), format!("{:e}", f.r_squared))).unwrap_or_default();
    writeln!(f, "{},{},{:e},{:e},{slope},{r2}", report.name, report.paths, report.mean, report.stderr)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bv_examples() {
        let g = Grid::new_1d(4, 4.0).unwrap();
        assert_eq!(bv_seminorm(&Field::constant(g, 3.0)), 0.0);
        assert_eq!(bv_seminorm(&Field::new(g, vec![0.0, 1.0, 0.0, 0.0]).unwrap()), 2.0);
    }

    #[test]
    fn lp_examples() {
        let g = Grid::new_1d(10, 1.0).unwrap();
        let c = Field::constant(g, -2.5);
        for p in [Norm::L(1), Norm::L(2), Norm::L(3), Norm::L(7), Norm::Inf] {
            assert!((lp_norm(&c, p).unwrap() - 2.5).abs() < 1e-14);
        }
        let half = Field::from_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 });
        assert!((lp_norm(&half, Norm::L(1)).unwrap() - 0.5).abs() < 1e-15);
        assert!(lp_norm(&c, Norm::L(0)).is_err());
    }

    #[test]
    fn translation_examples() {
        let g = Grid::new_1d(64, 1.0).unwrap();
        let h = g.spacing(0);
        let ind = Field::from_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 });
        assert_eq!(translation_modulus(&ind, 0.9 * h, &WeightFunction::One).unwrap(), 0.0);
        let one = translation_modulus(&ind, h, &WeightFunction::One).unwrap();
        assert!((one - 2.0 * h).abs() < 1e-15);
        // Lipschitz bound: |u(x+z) - u(x)| <= K |z|
        let k = 2.0 * std::f64::consts::PI * 3.0;
        let s = Field::from_fn(g, |x| (k * x[0]).sin());
        for m in [1.0, 3.0, 8.0] {
            let d = m * h;
            assert!(translation_modulus(&s, d, &WeightFunction::One).unwrap() <= k * d * 1.0 + 1e-12);
        }
    }

    #[test]
    fn besov_examples() {
        let g = Grid::new_1d(256, 1.0).unwrap();
        let h = g.spacing(0);
        assert_eq!(besov_dual_modulus(&Field::constant(g, 2.0), 8.0 * h, &WeightFunction::One).unwrap(), 0.0);
        assert!(matches!(
            besov_dual_modulus(&Field::constant(g, 2.0), 1.5 * h, &WeightFunction::One),
            Err(SblError::KernelUnderResolved { .. })
        ));
    }

    #[test]
    fn rate_fit_examples() {
        let f = fit_rate(&[(1.0, 2.0), (2.0, 4.0), (4.0, 8.0)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14 && (f.r_squared - 1.0).abs() < 1e-14);
        let f = fit_rate(&[(1.0, 1.0), (4.0, 2.0), (16.0, 4.0)]).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-14);
        assert!(matches!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(SblError::NonPositiveFitPoint { .. })));
        assert!(matches!(fit_rate(&[(1.0, 1.0)]), Err(SblError::TooFewScales { .. })));
    }

    #[test]
    fn constant_functional_has_zero_stderr() {
        let r = mc_expectation("c", 50, 7, |_| Ok::<f64, SblError>(1.25)).unwrap();
        assert_eq!(r.mean, 1.25);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.per_path.len(), 50);
        assert!(mc_expectation("c", 1, 7, |_| Ok::<f64, SblError>(1.0)).is_err());
    }

    #[test]
    fn failures_are_recorded_or_abort() {
        let few = mc_expectation("f", 100, 0, |s| if s % 20 == 0 { Err("boom") } else { Ok(1.0) }).unwrap();
        assert_eq!(few.failures.len(), 5);
        assert_eq!(few.paths, 95);
        let many = mc_expectation("f", 100, 0, |s| if s % 5 == 0 { Err("boom") } else { Ok(1.0) });
        assert!(matches!(many, Err(SblError::TooManyFailures { failed: 20, .. })));
    }

    #[test]
    fn summary_csv_appends_with_single_header() {
        let dir = std::env::temp_dir().join(format!("sbl-est-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("summary.csv");
        let _ = std::fs::remove_file(&p);
        let r = EstimateReport::from_values("tv", vec![1.0, 2.0, 3.0], 0);
        let fit = fit_rate(&[(1.0, 1.0), (2.0, 2.0), (4.0, 4.0)]).unwrap();
        append_summary_row(&p, &r, None).unwrap();
        append_summary_row(&p, &r, Some(&fit)).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",,"));
        assert!(lines[2].starts_with("tv,3,2e0,"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
