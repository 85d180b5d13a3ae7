//! Result tables, verdict rules, and their on-disk form.
//!
//! Every verdict is a pure function of the rows of an experiment's table, so re-reading
//! the CSV reproduces it exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sbl_core::besov::{constants_stable, RatioReport};
use sbl_core::estimators::{fit_rate, EstimateReport, RateFit};

use crate::config::ExperimentKind;
use crate::error::{ExperimentError, Result};

/// Statistical margin in standard errors.
pub const STDERR_FACTOR: f64 = 3.0;
/// Relative slack of the contraction bound.
pub const CONTRACTION_SLACK: f64 = 0.05;
/// Smallest accepted slope of the temporal modulus (one third minus 0.03).
pub const TIME_SLOPE_MIN: f64 = 0.30;
pub const VISC_SLOPE_MIN: f64 = 0.4;
pub const VISC_R2_MIN: f64 = 0.9;
pub const CONT_DEP_SLOPE: (f64, f64) = (0.9, 1.1);
pub const FRACTIONAL_SLOPE_MIN: f64 = 0.3;
/// Largest accepted change of an empirical constant under grid halving.
pub const STABILITY_FACTOR: f64 = 2.0;

/// One line of a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub quantity: String,
    pub scale: f64,
    pub paths: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl Row {
    pub fn new(quantity: impl Into<String>, scale: f64, report: &EstimateReport) -> Self {
        Self { quantity: quantity.into(), scale, paths: report.paths, mean: report.mean, stderr: report.stderr }
    }

    pub fn exact(quantity: impl Into<String>, scale: f64, value: f64) -> Self {
        Self { quantity: quantity.into(), scale, paths: 1, mean: value, stderr: 0.0 }
    }

    pub fn param(name: &str, value: f64) -> Self {
        Self::exact(format!("param|{name}"), 0.0, value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub description: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub fit: Option<RateFit>,
}

struct Builder {
    checks: Vec<Check>,
    fit: Option<RateFit>,
}

impl Builder {
    fn check(&mut self, passed: bool, description: String) {
        self.checks.push(Check { description, passed });
    }

    fn finish(self) -> Verdict {
        let passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        Verdict { passed, checks: self.checks, fit: self.fit }
    }

    fn fit(&mut self, rows: &[&Row]) -> Option<RateFit> {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.scale, r.mean)).collect();
        match fit_rate(&pts) {
            Ok(f) => {
                self.fit = Some(f.clone());
                Some(f)
            }
            Err(e) => {
                self.check(false, format!("rate fit: {e}"));
                None
            }
        }
    }
}

fn rows_of<'a>(rows: &'a [Row], quantity: &str) -> Vec<&'a Row> {
    let mut v: Vec<&Row> = rows.iter().filter(|r| r.quantity == quantity).collect();
    v.sort_by(|a, b| a.scale.total_cmp(&b.scale));
    v
}

fn param(rows: &[Row], name: &str) -> Option<f64> {
    let q = format!("param|{name}");
    rows.iter().find(|r| r.quantity == q).map(|r| r.mean)
}

fn nondecreasing(rows: &[&Row]) -> bool {
    rows.windows(2).all(|w| w[1].mean >= w[0].mean)
}

/// Applies the acceptance rule of `kind` to a result table.
pub fn evaluate(kind: ExperimentKind, rows: &[Row]) -> Verdict {
    let mut b = Builder { checks: Vec::new(), fit: None };
    let k = STDERR_FACTOR;
    match kind {
        ExperimentKind::BvDecay => {
            let tv = rows_of(rows, "tv");
            let htol = param(rows, "h_tolerance").unwrap_or(0.0);
            match tv.first() {
                Some(first) if first.scale == 0.0 => {
                    for r in &tv[1..] {
                        b.check(
                            r.mean <= first.mean + k * r.stderr + htol,
                            format!("E TV(t={}) = {} <= TV(0) + {k} se + h tol = {}", r.scale, r.mean, first.mean + k * r.stderr + htol),
                        );
                    }
                }
                _ => b.check(false, "no TV row at t = 0".into()),
            }
            if param(rows, "exact") == Some(1.0) {
                for q in ["tv", "l1"] {
                    let v = rows_of(rows, q);
                    if let (Some(first), Some(last)) = (v.first(), v.last()) {
                        b.check(
                            (last.mean - first.mean).abs() <= k * last.stderr,
                            format!("E {q}(T) = {} equals {q}(0) = {} within {k} se = {}", last.mean, first.mean, k * last.stderr),
                        );
                    }
                }
            }
        }
        ExperimentKind::TimeContinuity => {
            let m = rows_of(rows, "modulus");
            if m.is_empty() {
                b.check(false, "no modulus rows".into());
            } else if m.iter().all(|r| r.mean == 0.0) {
                b.check(true, "modulus vanishes at every lag; fit skipped".into());
            } else {
                b.check(nondecreasing(&m), "modulus nondecreasing in the lag".into());
                if let Some(f) = b.fit(&m) {
                    b.check(f.slope >= TIME_SLOPE_MIN, format!("slope {} >= {TIME_SLOPE_MIN}", f.slope));
                }
            }
        }
        ExperimentKind::Contraction => {
            let d = rows_of(rows, "distance");
            let floor = param(rows, "abs_floor").unwrap_or(0.0);
            match d.first() {
                Some(first) if first.scale == 0.0 => {
                    for r in &d[1..] {
                        let bound = first.mean * (1.0 + CONTRACTION_SLACK) + k * r.stderr + floor;
                        b.check(r.mean <= bound, format!("E dist(t={}) = {} <= {bound}", r.scale, r.mean));
                    }
                }
                _ => b.check(false, "no distance row at t = 0".into()),
            }
        }
        ExperimentKind::ViscRate => {
            let e = rows_of(rows, "error");
            if let Some(f) = b.fit(&e) {
                b.check(f.slope >= VISC_SLOPE_MIN, format!("slope {} >= {VISC_SLOPE_MIN}", f.slope));
                b.check(f.r_squared >= VISC_R2_MIN, format!("r^2 {} >= {VISC_R2_MIN}", f.r_squared));
            }
        }
        ExperimentKind::ContDepSigma | ExperimentKind::ContDepFlux => {
            let d = rows_of(rows, "distance");
            if let Some(f) = b.fit(&d) {
                let (lo, hi) = CONT_DEP_SLOPE;
                b.check((lo..=hi).contains(&f.slope), format!("slope {} in [{lo}, {hi}]", f.slope));
            }
            let t = param(rows, "horizon").unwrap_or(f64::NAN);
            let c = d.iter().map(|r| r.mean / ((t.sqrt() + t) * r.scale)).fold(0.0, f64::max);
            b.check(c.is_finite(), format!("C in dist <= C (sqrt T + T) eta is finite: {c}"));
        }
        ExperimentKind::FractionalBv => {
            let m = rows_of(rows, "modulus");
            b.check(nondecreasing(&m), "modulus nondecreasing in delta".into());
            if let Some(f) = b.fit(&m) {
                b.check(f.slope >= FRACTIONAL_SLOPE_MIN, format!("slope {} >= {FRACTIONAL_SLOPE_MIN}", f.slope));
            }
            if param(rows, "x_dependent") == Some(0.0) {
                if let Some(tv) = rows_of(rows, "tv").first() {
                    for r in &m {
                        let bound = r.scale * tv.mean * (1.0 + 1e-12) + 1e-12;
                        b.check(r.mean <= bound, format!("modulus({}) = {} <= delta E TV = {bound}", r.scale, r.mean));
                    }
                }
            }
        }
        ExperimentKind::EntropyResidual => {
            let h = param(rows, "h").unwrap_or(f64::NAN);
            let c = param(rows, "h_factor").unwrap_or(f64::NAN);
            let mut any = false;
            for r in rows.iter().filter(|r| r.quantity.starts_with("residual|")) {
                any = true;
                let bound = -k * r.stderr - c * h;
                b.check(r.mean >= bound, format!("{} mean {} >= {bound}", r.quantity, r.mean));
            }
            if !any {
                b.check(false, "no residual rows".into());
            }
            for r in rows.iter().filter(|r| r.quantity.starts_with("control|")) {
                b.check(r.mean > 0.0, format!("{} = {} > 0", r.quantity, r.mean));
            }
        }
        ExperimentKind::LemmaChecks => {
            let mut constants: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.quantity.starts_with("ratio|")) {
                let parts: Vec<&str> = r.quantity.split('|').collect();
                if parts.len() != 4 {
                    b.check(false, format!("malformed ratio row {}", r.quantity));
                    continue;
                }
                b.check(r.mean.is_finite(), format!("{} at delta {} finite", r.quantity, r.scale));
                let cells: f64 = parts[3].parse().unwrap_or(f64::NAN);
                let entry = constants.entry((parts[1].to_string(), parts[2].to_string())).or_default();
                match entry.iter_mut().find(|(n, _)| *n == cells) {
                    Some((_, c)) => *c = c.max(r.mean),
                    None => entry.push((cells, r.mean)),
                }
            }
            if constants.is_empty() {
                b.check(false, "no ratio rows".into());
            }
            for ((dir, label), mut cs) in constants {
                cs.sort_by(|a, b| a.0.total_cmp(&b.0));
                for w in cs.windows(2) {
                    b.check(
                        constants_stable(w[0].1, w[1].1, STABILITY_FACTOR),
                        format!("{dir} {label}: constant {} (N={}) vs {} (N={}) within {STABILITY_FACTOR}x", w[0].1, w[0].0, w[1].1, w[1].0),
                    );
                }
            }
            for r in rows.iter().filter(|r| r.quantity.starts_with("property|")) {
                b.check(r.mean <= r.scale, format!("{}: violation {} <= tolerance {}", r.quantity, r.mean, r.scale));
            }
        }
    }
    b.finish()
}

/// Monte Carlo report of one table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub quantity: String,
    pub scale: f64,
    pub report: EstimateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: ExperimentKind,
    pub name: String,
    pub config_digest: String,
    pub seed_base: u64,
    pub rows: Vec<Row>,
    pub reports: Vec<ScaleReport>,
    #[serde(default)]
    pub ratio_reports: Vec<RatioReport>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub wall_time_secs: f64,
}

pub const TABLE_HEADER: &str = "experiment,quantity,scale,M,mean,stderr";

impl ResultRecord {
    pub fn passed(&self) -> bool {
        self.verdict.passed
    }

    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TABLE_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{},{},{:e},{},{:e},{:e}", self.experiment.as_str(), r.quantity, r.scale, r.paths, r.mean, r.stderr)?;
        }
        Ok(())
    }

    /// Writes `<name>.json`, `<name>.csv`, `<name>_fit.csv`, `<name>_summary.csv`, and for the
    /// lemma checks `<name>_ratios.csv`. Returns the table path.
    pub fn write_outputs(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let base = dir.join(&self.name);
        let json = serde_json::to_string_pretty(self).map_err(|e| ExperimentError::Results(e.to_string()))?;
        std::fs::write(base.with_extension("json"), json + "\n")?;

        let table = base.with_extension("csv");
        self.write_table(std::io::BufWriter::new(std::fs::File::create(&table)?))?;

        let mut fit = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{}_fit.csv", self.name)))?);
        writeln!(fit, "slope,intercept,r_squared")?;
        if let Some(f) = &self.verdict.fit {
            writeln!(fit, "{:e},{:e},{:e}", f.slope, f.intercept, f.r_squared)?;
        }
        fit.flush()?;

        let summary = dir.join(format!("{}_summary.csv", self.name));
        if summary.exists() {
            std::fs::remove_file(&summary)?;
        }
        for s in &self.reports {
            let mut rep = s.report.clone();
            rep.name = format!("{}@{:e}", s.quantity, s.scale);
            sbl_core::estimators::append_summary_row(&summary, &rep, self.verdict.fit.as_ref())?;
        }

        if !self.ratio_reports.is_empty() {
            let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{}_ratios.csv", self.name)))?);
            writeln!(out, "{}", RatioReport::CSV_HEADER)?;
            for r in &self.ratio_reports {
                r.write_csv_rows(&mut out)?;
            }
            out.flush()?;
        }
        Ok(table)
    }
}

/// Reads a result table back; returns the experiment kind and its rows.
pub fn read_table<R: BufRead>(input: R) -> Result<(ExperimentKind, Vec<Row>)> {
    let bad = |m: String| ExperimentError::Results(m);
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == TABLE_HEADER => {}
        _ => return Err(bad("missing table header".into())),
    }
    let mut kind = None;
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(format!("line {}: expected 6 fields", n + 2)));
        }
        let k = ExperimentKind::parse(f[0]).ok_or_else(|| bad(format!("line {}: unknown experiment {}", n + 2, f[0])))?;
        if kind.is_some_and(|x| x != k) {
            return Err(bad(format!("line {}: mixed experiments", n + 2)));
        }
        kind = Some(k);
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("line {}: bad number {s}", n + 2)));
        rows.push(Row {
            quantity: f[1].to_string(),
            scale: num(f[2])?,
            paths: f[3].parse().map_err(|_| bad(format!("line {}: bad count {}", n + 2, f[3])))?,
            mean: num(f[4])?,
            stderr: num(f[5])?,
        });
    }
    Ok((kind.ok_or_else(|| bad("empty table".into()))?, rows))
}
