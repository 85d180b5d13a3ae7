use std::f64::consts::{PI, TAU};

use sbl_core::estimators::{bv_seminorm, l1_distance, lp_norm, Norm};
use sbl_core::noise::uniform_grid;
use sbl_core::solver::{solve, FluxScheme, SolverConfig};
use sbl_core::{sample_path, Field, FluxModel, Grid, InitialData, NoiseModel, Problem};

fn mass(u: &Field) -> f64 {
    u.values().iter().sum::<f64>() * u.grid().cell_volume()
}

fn advection_error(n: usize) -> f64 {
    let grid = Grid::new_1d(n, TAU).unwrap();
    let p = Problem::new(FluxModel::linear(1.0), NoiseModel::zero(), 0.0, InitialData::sine(1.0, 1.0), TAU);
    let path = sample_path(0, 1, &uniform_grid(TAU, 1)).unwrap();
    let traj = solve(&p, &grid, &path, &SolverConfig::default()).unwrap();
    // one full period of travel returns the profile to itself
    l1_distance(&traj.terminal, &p.initial.sample(&grid).unwrap()).unwrap()
}

#[test]
fn advection_error_is_first_order() {
    let (e1, e2, e3) = (advection_error(128), advection_error(256), advection_error(512));
    assert!(e3 < e2 && e2 < e1);
    for ratio in [e1 / e2, e2 / e3] {
        assert!((1.6..2.4).contains(&ratio), "error ratio {ratio}");
    }
}

#[test]
fn linear_noise_reproduces_euler_product() {
    let lambda = 0.5;
    let grid = Grid::new_1d(64, TAU).unwrap();
    let p = Problem::new(FluxModel::zero(), NoiseModel::linear(lambda), 0.0, InitialData::bump(PI, 2.0, 1.5), 1.0);
    for seed in 0..5 {
        let path = sample_path(seed, 1, &uniform_grid(1.0, 100)).unwrap();
        let traj = solve(&p, &grid, &path, &SolverConfig::default()).unwrap();
        assert_eq!(traj.steps, 100);
        let factor: f64 = path.increments().iter().map(|dw| 1.0 + lambda * dw).product();
        let u0 = p.initial.sample(&grid).unwrap();
        for (u, v) in traj.terminal.values().iter().zip(u0.values()) {
            assert!((u - v * factor).abs() <= 1e-12 * (1.0 + v.abs() * factor.abs()));
        }
    }
}

#[test]
fn heat_decay_matches_discrete_and_exact_fourier_modes() {
    let (eps, k, t) = (0.01, 3.0, 1.0);
    let n = 128;
    let grid = Grid::new_1d(n, TAU).unwrap();
    let h = grid.spacing(0);
    let p = Problem::new(FluxModel::zero(), NoiseModel::zero(), eps, InitialData::sine(1.0, k), t);
    let steps = 400;
    let dt = t / steps as f64;
    let path = sample_path(0, 1, &uniform_grid(t, steps)).unwrap();
    let traj = solve(&p, &grid, &path, &SolverConfig::default()).unwrap();
    assert_eq!(traj.steps, steps);
    let discrete = (1.0 - 2.0 * eps * dt / (h * h) * (1.0 - (k * h).cos())).powi(steps as i32);
    let exact = (-eps * k * k * t).exp();
    let u0 = p.initial.sample(&grid).unwrap();
    for (u, v) in traj.terminal.values().iter().zip(u0.values()) {
        assert!((u - discrete * v).abs() < 1e-12);
        assert!((u - exact * v).abs() < 1e-3);
    }
}

#[test]
fn mass_is_conserved_without_noise() {
    for scheme in [FluxScheme::LocalLaxFriedrichs, FluxScheme::EngquistOsher] {
        let grid = Grid::new_1d(200, TAU).unwrap();
        let p = Problem::new(FluxModel::burgers(), NoiseModel::zero(), 1e-3, InitialData::step(1.0, 0.0, PI), 2.0);
        let path = sample_path(0, 1, &uniform_grid(2.0, 20)).unwrap();
        let cfg = SolverConfig { flux_scheme: scheme, ..SolverConfig::with_snapshots(uniform_grid(2.0, 20)) };
        let traj = solve(&p, &grid, &path, &cfg).unwrap();
        let m0 = mass(&traj.snapshots[0].field);
        for s in &traj.snapshots {
            assert!((mass(&s.field) - m0).abs() <= 1e-10 * (1.0 + s.time));
        }
    }
}

#[test]
fn monotone_scheme_is_tvd() {
    for scheme in [FluxScheme::LocalLaxFriedrichs, FluxScheme::EngquistOsher] {
        let grid = Grid::new_1d(256, TAU).unwrap();
        let init = InitialData::Sum { parts: vec![InitialData::sine(1.0, 2.0), InitialData::step(0.5, -0.5, 2.0)] };
        let p = Problem::new(FluxModel::burgers(), NoiseModel::zero(), 0.0, init, 1.5);
        // one snapshot per path node, and the path is fine enough that no bisection occurs
        let times = uniform_grid(1.5, 300);
        let path = sample_path(0, 1, &times).unwrap();
        let cfg = SolverConfig { flux_scheme: scheme, ..SolverConfig::with_snapshots(times) };
        let traj = solve(&p, &grid, &path, &cfg).unwrap();
        assert_eq!(traj.steps, 300);
        for w in traj.snapshots.windows(2) {
            assert!(bv_seminorm(&w[1].field) <= bv_seminorm(&w[0].field) + 1e-12);
        }
    }
}

#[test]
fn solve_is_deterministic() {
    let grid = Grid::new_1d(128, TAU).unwrap();
    let p = Problem::new(FluxModel::burgers(), NoiseModel::linear(0.3), 5e-3, InitialData::step(1.0, 0.0, PI), 0.5);
    let path = sample_path(9, 1, &uniform_grid(0.5, 16)).unwrap();
    let cfg = SolverConfig::with_snapshots(uniform_grid(0.5, 8));
    let a = solve(&p, &grid, &path, &cfg).unwrap();
    let b = solve(&p, &grid, &path, &cfg).unwrap();
    assert_eq!(a, b);
    let mut bytes_a = Vec::new();
    let mut bytes_b = Vec::new();
    a.write_binary(&mut bytes_a).unwrap();
    b.write_binary(&mut bytes_b).unwrap();
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn snapshots_land_on_requested_times() {
    let grid = Grid::new_1d(128, TAU).unwrap();
    let p = Problem::new(FluxModel::burgers(), NoiseModel::sine(0.3), 5e-3, InitialData::step(1.0, 0.0, PI), 0.5);
    let path = sample_path(1, 1, &uniform_grid(0.5, 64)).unwrap();
    let req = uniform_grid(0.5, 8);
    let traj = solve(&p, &grid, &path, &SolverConfig::with_snapshots(req.clone())).unwrap();
    assert_eq!(traj.snapshots.len(), req.len());
    for (s, t) in traj.snapshots.iter().zip(&req) {
        assert!((s.time - t).abs() < 1e-12);
        assert!(s.field.values().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn two_dimensional_smoke() {
    let grid = Grid::new_2d([48, 48], [TAU, TAU]).unwrap();
    let p = Problem::new(FluxModel::burgers(), NoiseModel::linear(0.2), 1e-2, InitialData::bump(PI, 1.5, 1.0), 0.3);
    let path = sample_path(4, 1, &uniform_grid(0.3, 10)).unwrap();
    let traj = solve(&p, &grid, &path, &SolverConfig::with_snapshots(vec![0.0, 0.3])).unwrap();
    assert!(traj.terminal.values().iter().all(|v| v.is_finite()));
    assert!(lp_norm(&traj.terminal, Norm::Inf).unwrap() < 2.0);
    // without noise the 2-D scheme is conservative as well
    let det = Problem { noise: NoiseModel::zero(), ..p };
    let traj = solve(&det, &grid, &path, &SolverConfig::default()).unwrap();
    let m0 = mass(&det.initial.sample(&grid).unwrap());
    assert!((mass(&traj.terminal) - m0).abs() < 1e-10);
}
