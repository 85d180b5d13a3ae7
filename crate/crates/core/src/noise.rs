//! Seeded discrete Wiener paths with Brownian-bridge refinement.
//!
//! Every Gaussian draw is addressed by `(seed, mode, level, index)`: level 0 holds the
//! increments of the base grid and level `l + 1` holds the bridge midpoints of the
//! level-`l` steps. Draws come from a ChaCha8 keystream positioned by that address, so
//! a path (or any refinement of any sub-interval) is reproduced bit for bit regardless
//! of the order in which it is generated.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Result, SblError};

const MAX_LEVEL: u32 = 200;

fn stream_id(mode: usize, level: u32) -> u64 {
    ((mode as u64) << 8) | level as u64
}

/// `count` standard normals at consecutive indices starting from `start`.
pub fn normals(seed: u64, mode: usize, level: u32, start: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(mode, level));
    // two u64 (four 32-bit words) per normal
    rng.set_word_pos(start as u128 * 4);
    (0..count)
        .map(|_| {
            let a = rng.next_u64();
            let b = rng.next_u64();
            let u1 = ((a >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
            let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect()
}

/// Uniform time grid `0, T/steps, ..., T`.
pub fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
    let dt = horizon / steps as f64;
    (0..=steps).map(|j| if j == steps { horizon } else { j as f64 * dt }).collect()
}

/// A discrete `m`-mode Wiener path on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    seed: u64,
    modes: usize,
    level: u32,
    time_grid: Vec<f64>,
    /// Mode-major: mode `k`, step `j` lives at `k * steps + j`.
    increments: Vec<f64>,
}

fn check_grid(time_grid: &[f64]) -> Result<()> {
    if time_grid.first().copied() != Some(0.0) {
        return Err(SblError::NonMonotoneTimeGrid { index: 0 });
    }
    for (i, w) in time_grid.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(SblError::NonMonotoneTimeGrid { index: i + 1 });
        }
    }
    Ok(())
}

/// Samples i.i.d. `N(0, t_{j+1} - t_j)` increments for every mode.
pub fn sample_path(seed: u64, modes: usize, time_grid: &[f64]) -> Result<BrownianPath> {
    check_grid(time_grid)?;
    if modes == 0 {
        return Err(SblError::InvalidArgument("path needs at least one mode".into()));
    }
    let steps = time_grid.len() - 1;
    let mut increments = Vec::with_capacity(modes * steps);
    for k in 0..modes {
        let z = normals(seed, k, 0, 0, steps);
        increments.extend(time_grid.windows(2).zip(z).map(|(w, z)| (w[1] - w[0]).sqrt() * z));
    }
    Ok(BrownianPath { seed, modes, level: 0, time_grid: time_grid.to_vec(), increments })
}

/// Halves every step, drawing midpoints from the Brownian-bridge law.
pub fn refine_path(p: &BrownianPath) -> Result<BrownianPath> {
    p.refine()
}

impl BrownianPath {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn steps(&self) -> usize {
        self.time_grid.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.time_grid.last().expect("nonempty grid")
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn increment(&self, mode: usize, step: usize) -> f64 {
        self.increments[mode * self.steps() + step]
    }

    pub fn mode_increments(&self, mode: usize) -> &[f64] {
        let n = self.steps();
        &self.increments[mode * n..(mode + 1) * n]
    }

    /// `W_k(t_j)` for `j = 0..=steps`, starting from zero.
    pub fn values(&self, mode: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.steps() + 1);
        w.push(0.0);
        let mut acc = 0.0;
        for dw in self.mode_increments(mode) {
            acc += dw;
            w.push(acc);
        }
        w
    }

    pub fn is_uniform(&self) -> bool {
        let n = self.steps();
        if n == 0 {
            return true;
        }
        let dt = self.horizon() / n as f64;
        let tol = 1e-9 * dt;
        self.time_grid.iter().enumerate().all(|(j, &t)| (t - j as f64 * dt).abs() <= tol)
    }

    pub fn refine(&self) -> Result<BrownianPath> {
        if !self.is_uniform() {
            return Err(SblError::NonUniformTimeGrid);
        }
        if self.level >= MAX_LEVEL {
            return Err(SblError::InvalidArgument("refinement depth exhausted".into()));
        }
        let n = self.steps();
        let mut time_grid = Vec::with_capacity(2 * n + 1);
        for w in self.time_grid.windows(2) {
            time_grid.push(w[0]);
            time_grid.push(0.5 * (w[0] + w[1]));
        }
        time_grid.push(self.horizon());
        let mut increments = Vec::with_capacity(2 * self.increments.len());
        for k in 0..self.modes {
            let z = normals(self.seed, k, self.level + 1, 0, n);
            for (j, &dw) in self.mode_increments(k).iter().enumerate() {
                let dt = self.time_grid[j + 1] - self.time_grid[j];
                let (a, b) = split(dw, dt, z[j]);
                increments.push(a);
                increments.push(b);
            }
        }
        Ok(BrownianPath { seed: self.seed, modes: self.modes, level: self.level + 1, time_grid, increments })
    }

    /// Increments of step `step` after `extra` further bridge refinements, for one mode.
    ///
    /// Agrees exactly with the corresponding entries of `refine()` applied `extra` times.
    pub fn refined_increments(&self, mode: usize, step: usize, extra: u32) -> Vec<f64> {
        let mut cur = vec![self.increment(mode, step)];
        let mut dt = self.time_grid[step + 1] - self.time_grid[step];
        let mut first = step as u64;
        for l in 0..extra {
            let z = normals(self.seed, mode, self.level + l + 1, first, cur.len());
            let mut next = Vec::with_capacity(2 * cur.len());
            for (dw, z) in cur.iter().zip(z) {
                let (a, b) = split(*dw, dt, z);
                next.push(a);
                next.push(b);
            }
            cur = next;
            dt *= 0.5;
            first *= 2;
        }
        cur
    }

    /// Splits the increment `dw` over a step of length `dt` into its two bridge halves.
    ///
    /// `depth >= 1` is the refinement level of the children relative to this path and
    /// `parent` the global index of the split step at depth `depth - 1`.
    pub fn bridge_split(&self, mode: usize, depth: u32, parent: u64, dw: f64, dt: f64) -> (f64, f64) {
        let z = normals(self.seed, mode, self.level + depth, parent, 1)[0];
        split(dw, dt, z)
    }

    /// One row per increment: `step,mode,increment`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,mode,increment")?;
        for k in 0..self.modes {
            for (j, dw) in self.mode_increments(k).iter().enumerate() {
                writeln!(out, "{j},{k},{dw:e}")?;
            }
        }
        Ok(())
    }
}

fn split(dw: f64, dt: f64, z: f64) -> (f64, f64) {
    let left = 0.5 * dw + 0.5 * dt.sqrt() * z;
    (left, dw - left)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_grid_has_no_increments() {
        let p = sample_path(7, 2, &[0.0]).unwrap();
        assert!(p.increments().is_empty());
        assert_eq!(p.values(1), vec![0.0]);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let g = uniform_grid(1.0, 50);
        let a = sample_path(42, 3, &g).unwrap();
        let b = sample_path(42, 3, &g).unwrap();
        assert_eq!(a, b);
        let c = sample_path(43, 3, &g).unwrap();
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(sample_path(1, 1, &[0.0, 0.5, 0.5]), Err(SblError::NonMonotoneTimeGrid { index: 2 })));
        assert!(sample_path(1, 1, &[0.1, 0.5]).is_err());
        let p = sample_path(1, 1, &[0.0, 0.1, 0.5]).unwrap();
        assert!(matches!(refine_path(&p), Err(SblError::NonUniformTimeGrid)));
    }

    #[test]
    fn random_access_matches_sequential_draws() {
        let all = normals(9, 1, 0, 0, 100);
        for start in [0u64, 1, 17, 63, 99] {
            assert_eq!(normals(9, 1, 0, start, 1)[0], all[start as usize]);
        }
        assert_eq!(&normals(9, 1, 0, 40, 20)[..], &all[40..60]);
    }

    #[test]
    fn refinement_preserves_parent_increments() {
        let p = sample_path(5, 2, &uniform_grid(1.0, 16)).unwrap();
        let r = p.refine().unwrap();
        assert_eq!(r.steps(), 32);
        for k in 0..2 {
            for j in 0..16 {
                let s = r.increment(k, 2 * j) + r.increment(k, 2 * j + 1);
                assert!((s - p.increment(k, j)).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn double_refinement_keeps_coarse_values() {
        let p = sample_path(11, 1, &uniform_grid(2.0, 10)).unwrap();
        let rr = p.refine().unwrap().refine().unwrap();
        let (wc, wf) = (p.values(0), rr.values(0));
        for j in 0..=10 {
            assert!((wc[j] - wf[4 * j]).abs() <= 1e-12);
            assert!((p.time_grid()[j] - rr.time_grid()[4 * j]).abs() <= 1e-15);
        }
    }

    #[test]
    fn local_refinement_matches_global() {
        let p = sample_path(3, 2, &uniform_grid(1.0, 8)).unwrap();
        let rrr = p.refine().unwrap().refine().unwrap().refine().unwrap();
        for k in 0..2 {
            for j in 0..8 {
                let local = p.refined_increments(k, j, 3);
                assert_eq!(&local[..], &rrr.mode_increments(k)[8 * j..8 * j + 8]);
            }
        }
        assert_eq!(p.refined_increments(1, 4, 0), vec![p.increment(1, 4)]);
    }

    #[test]
    fn csv_lists_every_increment() {
        let p = sample_path(1, 2, &uniform_grid(1.0, 3)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
        assert!(text.starts_with("step,mode,increment\n0,0,"));
    }
}
