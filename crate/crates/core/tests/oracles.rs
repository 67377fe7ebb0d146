//! Solver results against closed-form or brute-force energy oracles.

use nalgebra::DVector;
use vjmstiff::analysis::{orthoglide_chain, OrthoglideGeometry, Posture, DEFAULT_DROP_FACTOR};
use vjmstiff::*;

const K: f64 = 10.0;
const L: f64 = 1.0;
const KA: f64 = 1e3;

fn x_dir() -> Twist6 {
    Twist6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
}

fn solve_from(chain: &ChainModel, q0: &DVector<f64>, offset: &Twist6, settings: &SolverSettings) -> (EquilibriumState, EquilibriumState) {
    let start = EquilibriumState::unloaded(chain, q0).unwrap();
    let s = solve_equilibrium(chain, &start.pose.offset(offset), (&start.q, &start.theta), settings).unwrap();
    (start, s)
}

/// Minimizer of a unimodal function on `[a, b]` by grid scan then golden
/// section on the best cell.
fn grid_minimize(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 2000;
    let h = (b - a) / n as f64;
    let best = (0..=n).min_by(|i, j| f(a + *i as f64 * h).total_cmp(&f(a + *j as f64 * h))).unwrap();
    let (mut lo, mut hi) = (a + (best as f64 - 1.0) * h, a + (best as f64 + 1.0) * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) < f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn pendulum_reaction_is_energy_gradient() {
    // tip position fixes both spring deflections; the reaction is the
    // gradient of the stored energy with respect to the tip position
    let chain = models::inverted_pendulum(K, L, KA).unwrap();
    let energy = |x: f64, y: f64| {
        let phi = y.atan2(x);
        let s = x.hypot(y) - L;
        0.5 * K * phi * phi + 0.5 * KA * s * s
    };
    let (x, y) = (L - 1e-3, 1e-2);
    let (_, s) = solve_from(&chain, &DVector::zeros(1), &Twist6::new(x - L, y, 0.0, 0.0, 0.0, 0.0), &SolverSettings::default());
    let h = 1e-7;
    let fx = (energy(x + h, y) - energy(x - h, y)) / (2.0 * h);
    let fy = (energy(x, y + h) - energy(x, y - h)) / (2.0 * h);
    assert!((s.f[0] - fx).abs() <= 1e-6 * fx.abs().max(1.0), "{} vs {fx}", s.f[0]);
    assert!((s.f[1] - fy).abs() <= 1e-6 * fy.abs().max(1.0), "{} vs {fy}", s.f[1]);
    assert!((s.theta[0] - y.atan2(x)).abs() < 1e-12);
    assert!((s.theta[1] - (x.hypot(y) - L)).abs() < 1e-12);
}

/// Stored energy of the sliding-tip pendulum with the tip at `L − u` as a
/// function of the tilt.
fn column_energy(u: f64, phi: f64) -> f64 {
    let s = (L - u) / phi.cos() - L;
    0.5 * K * phi * phi + 0.5 * KA * s * s
}

#[test]
fn buckled_column_matches_energy_minimum() {
    let chain = models::pendulum_column(K, L, KA).unwrap();
    let settings = SolverSettings {
        require_stable: true,
        ..SolverSettings::default()
    };
    for u in [0.004, 0.02, 0.05] {
        let (_, s) = solve_from(&chain, &DVector::zeros(2), &Twist6::new(-u, 0.0, 0.0, 0.0, 0.0, 0.0), &settings);
        let phi = grid_minimize(|p| column_energy(u, p), 0.0, 1.2);
        let stretch = (L - u) / phi.cos() - L;
        assert!((s.theta[0].abs() - phi).abs() < 1e-6, "u = {u}: tilt {} vs {phi}", s.theta[0]);
        assert!((s.theta[1] - stretch).abs() < 1e-6, "u = {u}: stretch {} vs {stretch}", s.theta[1]);
        // axial reaction from the envelope of the minimized energy
        let fx = KA * stretch / phi.cos();
        assert!((s.f[0] - fx).abs() <= 1e-6 * fx.abs(), "u = {u}: {} vs {fx}", s.f[0]);
        assert!((s.energy(&chain) - column_energy(u, phi)).abs() <= 1e-6 * column_energy(u, phi));
    }
}

#[test]
fn stability_restart_reaches_lower_energy() {
    let settings = SolverSettings::default();
    let stable = SolverSettings {
        require_stable: true,
        ..settings.clone()
    };
    let column = models::pendulum_column(K, L, KA).unwrap();
    let offset = Twist6::new(-0.03, 0.0, 0.0, 0.0, 0.0, 0.0);
    let (_, straight) = solve_from(&column, &DVector::zeros(2), &offset, &settings);
    let (_, bent) = solve_from(&column, &DVector::zeros(2), &offset, &stable);
    assert!(straight.theta[0] == 0.0, "symmetric start stays straight");
    assert!(bent.restarts > 0 && bent.rejected_unstable.is_some_and(|l| l < 0.0));
    assert!(bent.stability_eigenvalue.is_some_and(|l| l > 0.0));
    assert!(bent.energy(&column) <= straight.energy(&column));

    // leg pushed well past its buckling point
    let (leg, q) = orthoglide_chain(Posture::B, &OrthoglideGeometry::default()).unwrap();
    let offset = x_dir() * 3.5e-3;
    let (_, stuck) = solve_from(&leg, &q, &offset, &settings);
    let (_, settled) = solve_from(&leg, &q, &offset, &stable);
    assert!(settled.stability_eigenvalue.is_some_and(|l| l >= 0.0));
    assert!(settled.energy(&leg) <= stuck.energy(&leg) * (1.0 + 1e-12));
}

#[test]
fn halving_the_sweep_step_keeps_the_curve() {
    let settings = SolverSettings::default();
    let (leg, q) = orthoglide_chain(Posture::A, &OrthoglideGeometry::default()).unwrap();
    let start = EquilibriumState::unloaded(&leg, &q).unwrap();
    let coarse = displacement_sweep(&leg, &start, &x_dir(), 2e-3, 2e-5, &settings).unwrap();
    let fine = displacement_sweep(&leg, &start, &x_dir(), 2e-3, 1e-5, &settings).unwrap();
    assert!(coarse.failure.is_none() && fine.failure.is_none());
    let critical = detect_buckling(&fine, DEFAULT_DROP_FACTOR).delta_cr;
    let mut compared = 0;
    for (i, c) in coarse.samples.iter().enumerate() {
        if (c.delta - critical).abs() < 1e-4 {
            continue;
        }
        let f = &fine.samples[2 * i];
        assert!((f.delta - c.delta).abs() < 1e-15);
        assert!((f.force - c.force).abs() <= 1e-3 * c.force.abs().max(1e-6), "Δ = {}: {} vs {}", c.delta, f.force, c.force);
        compared += 1;
    }
    assert!(compared > 80);
}

#[test]
fn sweep_without_critical_region_needs_no_restarts() {
    let (leg, q) = orthoglide_chain(Posture::C, &OrthoglideGeometry::default()).unwrap();
    let start = EquilibriumState::unloaded(&leg, &q).unwrap();
    let curve = displacement_sweep(&leg, &start, &(x_dir() * -1.0), 0.2e-3, 1e-6, &SolverSettings::default()).unwrap();
    assert!(curve.failure.is_none());
    assert!(curve.samples.iter().all(|s| s.restarts == 0 && !s.critical));
}

#[test]
fn lumped_column_converges_to_euler_load() {
    let exact = std::f64::consts::PI.powi(2) / 4.0;
    let mut last = f64::INFINITY;
    for n in [2, 4, 8] {
        let column = models::euler_column(n, 1.0, 1.0, 1e4).unwrap();
        let start = EquilibriumState::unloaded(&column, &DVector::zeros(2)).unwrap();
        let curve = displacement_sweep(&column, &start, &(x_dir() * -1.0), 1e-3, 5e-6, &SolverSettings::default()).unwrap();
        let r = detect_buckling(&curve, DEFAULT_DROP_FACTOR);
        assert!(r.detected, "{n} segments");
        let err = (r.f_cr - exact).abs() / exact;
        assert!(err < last, "{n} segments: error {err} not below {last}");
        last = err;
    }
    assert!(last < 0.01);
}
