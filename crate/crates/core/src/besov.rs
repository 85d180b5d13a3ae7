//! Mollification, the translation modulus `omega`, and numerical checks of the two
//! comparison inequalities between translation moduli and mollified (dual) moduli.
//!
//! Functions live on a 1-D periodic grid centered at the origin: cell `i` has physical
//! center `-L/2 + (i + 1/2) h`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SblError};
use crate::estimators::{besov_dual_modulus, lp_norm, shifted_l1, translation_modulus, weight_values, Norm};
use crate::grid::{Field, Grid};
use crate::kernel::DiscreteKernel;
use crate::weight::WeightFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub label: String,
    field: Field,
}

impl SampledFunction {
    /// Cell values of `f` at the physical centers of `cells` cells on `[-length/2, length/2)`.
    pub fn from_fn(label: impl Into<String>, cells: usize, length: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let g = Grid::new_1d(cells, length)?;
        let values: Vec<f64> = (0..cells).map(|i| f(g.center(0, i) - 0.5 * length)).collect();
        Self::from_samples(label, values, length)
    }

    pub fn from_samples(label: impl Into<String>, samples: Vec<f64>, length: f64) -> Result<Self> {
        let g = Grid::new_1d(samples.len(), length)?;
        Ok(Self { label: label.into(), field: Field::new(g, samples)? })
    }

    pub fn samples(&self) -> &[f64] {
        self.field.values()
    }

    pub fn spacing(&self) -> f64 {
        self.field.grid().spacing(0)
    }

    pub fn length(&self) -> f64 {
        self.field.grid().length(0)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Physical center of cell `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.field.grid().center(0, i) - 0.5 * self.length()
    }

    pub fn l1_norm(&self) -> f64 {
        lp_norm(&self.field, Norm::L(1)).expect("p = 1 is valid")
    }

    fn with_samples(&self, label: String, samples: Vec<f64>) -> Self {
        Self { label, field: Field::from_raw(*self.field.grid(), samples) }
    }
}

/// `h_delta(x) = int J_{delta/2}(y) h(x + y) dy` with the cell-integrated kernel.
pub fn mollify(f: &SampledFunction, delta: f64) -> Result<SampledFunction> {
    let h = f.spacing();
    if !(delta >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(SblError::KernelUnderResolved { delta, spacing: h });
    }
    let k = DiscreteKernel::new(0.5 * delta, h, 1.0)?;
    let g = *f.field.grid();
    let v = f.samples();
    let taps: Vec<(isize, f64)> = k.taps().collect();
    let out = (0..v.len()).map(|i| taps.iter().map(|&(m, w)| w * v[g.shifted(i, 0, m)]).sum()).collect();
    Ok(f.with_samples(f.label.clone(), out))
}

/// `omega(delta) = sup_{|z| <= delta} int |h(x + z) - h(x)| psi(x) dx` over whole-cell shifts.
pub fn modulus_omega(f: &SampledFunction, delta: f64, psi: &WeightFunction) -> Result<f64> {
    translation_modulus(&f.field, delta, psi)
}

/// `omega` at shifts `0, h, 2h, ..., (n/2) h`; beyond half the period it is constant.
fn omega_table(f: &SampledFunction, psi: &WeightFunction) -> Vec<f64> {
    let w = weight_values(f.field.grid(), psi);
    let n = f.samples().len();
    let mut out = Vec::with_capacity(n / 2 + 1);
    let mut running: f64 = 0.0;
    for m in 0..=(n / 2) as isize {
        let plus = shifted_l1(&f.field, (m, 0), (0, 0), &w);
        let minus = shifted_l1(&f.field, (-m, 0), (0, 0), &w);
        running = running.max(plus).max(minus);
        out.push(running);
    }
    out
}

/// Exact value of `r delta^r int_0^inf kappa^{-r-1} omega(kappa) d kappa` for the discrete,
/// piecewise-constant `omega` (constant on `[m h, (m + 1) h)`).
pub fn kappa_integral_bound(f: &SampledFunction, delta: f64, r: f64, psi: &WeightFunction) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) || !(delta > 0.0) {
        return Err(SblError::InvalidArgument(format!("need 0 < r < 1 and delta > 0, got r = {r}, delta = {delta}")));
    }
    let h = f.spacing();
    let table = omega_table(f, psi);
    let mut integral = 0.0;
    let last = table.len() - 1;
    for (m, &om) in table.iter().enumerate().skip(1) {
        let a = m as f64 * h;
        let piece = if m == last { a.powf(-r) / r } else { (a.powf(-r) - (a + h).powf(-r)) / r };
        integral += om * piece;
    }
    Ok(r * delta.powf(r) * integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub delta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Per-scale LHS/RHS ratios of one inequality on one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub label: String,
    pub rows: Vec<RatioRow>,
}

impl RatioReport {
    /// Empirical constant: the largest ratio.
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| r.lhs.is_finite() && r.rhs.is_finite() && r.ratio.is_finite())
    }

    pub const CSV_HEADER: &'static str = "label,delta,lhs,rhs,ratio";

    /// Rows without header.
    pub fn write_csv_rows<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.rows {
            writeln!(out, "{},{:e},{:e},{:e},{:e}", self.label, r.delta, r.lhs, r.rhs, r.ratio)?;
        }
        Ok(())
    }
}

fn ratio(delta: f64, lhs: f64, rhs: f64) -> Result<RatioRow> {
    let ratio = if lhs == 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        return Err(SblError::DegenerateRatio { delta, lhs });
    };
    Ok(RatioRow { delta, lhs, rhs, ratio })
}

fn check_exponents(r: f64, s: f64) -> Result<()> {
    if !(0.0 < r && r < s && s < 1.0) {
        return Err(SblError::InvalidArgument(format!("need 0 < r < s < 1, got r = {r}, s = {s}")));
    }
    Ok(())
}

/// Dual-to-translation direction: `LHS = int int |h(x+z) - h(x-z)| J_delta(z) psi(x)`,
/// `RHS = delta^r sup_{0 < |z| <= delta} |z|^{-s} int |h(x+z) - h(x-z)| psi(x)`.
pub fn check_sob_to_trans(
    f: &SampledFunction,
    psi: &WeightFunction,
    r: f64,
    s: f64,
    deltas: &[f64],
) -> Result<RatioReport> {
    check_exponents(r, s)?;
    let h = f.spacing();
    let w = weight_values(f.field.grid(), psi);
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if delta < 4.0 * h * (1.0 - 1e-12) {
            return Err(SblError::KernelUnderResolved { delta, spacing: h });
        }
        let lhs = besov_dual_modulus(&f.field, delta, psi)?;
        let mmax = (delta / h * (1.0 + 1e-12)).floor() as isize;
        let sup = (1..=mmax)
            .map(|m| (m as f64 * h).powf(-s) * shifted_l1(&f.field, (m, 0), (-m, 0), &w))
            .fold(0.0, f64::max);
        rows.push(ratio(delta, lhs, delta.powf(r) * sup)?);
    }
    Ok(RatioReport { label: f.label.clone(), rows })
}

/// Dyadic `delta' = 2^{-k}` in `[4h, 1]`.
pub fn dyadic_dual_scales(h: f64) -> Vec<f64> {
    (0..).map(|k| 0.5f64.powi(k)).take_while(|d| *d >= 4.0 * h * (1.0 - 1e-12)).collect()
}

/// Translation-to-dual direction: `LHS = omega(delta)`,
/// `RHS = delta^r [sup_{delta'} delta'^{-s} (dual modulus at delta')] + delta^r ||h||_{L1}`.
pub fn check_trans_to_sob(
    f: &SampledFunction,
    psi: &WeightFunction,
    r: f64,
    s: f64,
    deltas: &[f64],
) -> Result<RatioReport> {
    check_exponents(r, s)?;
    if let Some(&d) = deltas.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(SblError::InvalidArgument(format!("delta = {d} outside (0, 1]")));
    }
    let scales = dyadic_dual_scales(f.spacing());
    if scales.is_empty() {
        return Err(SblError::KernelUnderResolved { delta: 1.0, spacing: f.spacing() });
    }
    let mut sup: f64 = 0.0;
    for &d in &scales {
        sup = sup.max(d.powf(-s) * besov_dual_modulus(&f.field, d, psi)?);
    }
    let l1 = f.l1_norm();
    deltas
        .iter()
        .map(|&delta| ratio(delta, modulus_omega(f, delta, psi)?, delta.powf(r) * (sup + l1)))
        .collect::<Result<Vec<_>>>()
        .map(|rows| RatioReport { label: f.label.clone(), rows })
}

/// Seed of the coarse noise in the corpus.
pub const CORPUS_NOISE_SEED: u64 = 0x5eed;
pub const CORPUS_LENGTH: f64 = 4.0;

/// The four-function corpus on `[-2, 2)` with `cells` cells (a multiple of 128):
/// the indicator of `[-1/2, 1/2]`, the tent `max(0, 1 - |x|)`, `|x|^0.6 (1 - x^2)` on `|x| <= 1`,
/// and 64-cell Gaussian noise on `[-1, 1]` mollified at width `1/8`.
pub fn builtin_corpus(cells: usize) -> Result<Vec<SampledFunction>> {
    if cells % 128 != 0 {
        return Err(SblError::InvalidArgument(format!("corpus needs a multiple of 128 cells, got {cells}")));
    }
    let l = CORPUS_LENGTH;
    let step = SampledFunction::from_fn("step", cells, l, |x| if x.abs() <= 0.5 { 1.0 } else { 0.0 })?;
    let tent = SampledFunction::from_fn("tent", cells, l, |x| (1.0 - x.abs()).max(0.0))?;
    let hoelder =
        SampledFunction::from_fn("hoelder(0.6)", cells, l, |x| if x.abs() <= 1.0 { x.abs().powf(0.6) * (1.0 - x * x) } else { 0.0 })?;
    let coarse = crate::noise::normals(CORPUS_NOISE_SEED, 0, 0, 0, 64);
    let raw = SampledFunction::from_fn("mollified_noise", cells, l, |x| {
        if (-1.0..1.0).contains(&x) {
            coarse[((x + 1.0) * 32.0).floor() as usize]
        } else {
            0.0
        }
    })?;
    let noise = mollify(&raw, 0.125)?;
    Ok(vec![step, tent, hoelder, noise])
}

/// Physical dual scales `1/64, 1/32, 1/16, 1/8, 1/4`.
pub const CORPUS_DELTAS: [f64; 5] = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0];

/// Both inequalities on one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub sob_to_trans: RatioReport,
    pub trans_to_sob: RatioReport,
}

/// Runs both checks on every function, in parallel, preserving order.
pub fn check_corpus(
    corpus: &[SampledFunction],
    psi: &WeightFunction,
    r: f64,
    s: f64,
    deltas: &[f64],
) -> Result<Vec<LemmaCheck>> {
    corpus
        .par_iter()
        .map(|f| {
            Ok(LemmaCheck {
                sob_to_trans: check_sob_to_trans(f, psi, r, s, deltas)?,
                trans_to_sob: check_trans_to_sob(f, psi, r, s, deltas)?,
            })
        })
        .collect()
}

/// Whether two empirical constants agree within `factor` (two zeros agree).
pub fn constants_stable(a: f64, b: f64, factor: f64) -> bool {
    if a == 0.0 && b == 0.0 {
        return true;
    }
    a > 0.0 && b > 0.0 && a.max(b) / a.min(b) < factor
}
