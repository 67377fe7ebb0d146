//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Built without the libtest harness so the lines always print.

use std::time::{Duration, Instant};

use nalgebra::{DVector, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vjmstiff::analysis::{orthoglide_chain, orthoglide_legs, OrthoglideGeometry, Posture, SweepCurve, DEFAULT_DROP_FACTOR};
use vjmstiff::cli::{self, ChainSource, Format, GridRange, RunConfig};
use vjmstiff::equilibrium::stability_eigenvalue;
use vjmstiff::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, half: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-half..=half))
}

fn x_dir() -> Twist6 {
    Twist6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
}

fn sweep_from_zero(chain: &ChainModel, q: &DVector<f64>, dir: &Twist6, dmax: f64, step: f64) -> SweepCurve {
    let start = EquilibriumState::unloaded(chain, q).expect("unloaded state");
    displacement_sweep(chain, &start, dir, dmax, step, &SolverSettings::default()).expect("sweep arguments")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Analytic derivatives against central differences on random states.
fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = OrthoglideGeometry::default();
    let chains: Vec<(ChainModel, f64, f64, f64)> = vec![
        (models::single_spring(1000.0).unwrap(), 0.0, 1e-3, 100.0),
        (models::planar_2r().unwrap(), 1.5, 1e-3, 100.0),
        (orthoglide_chain(Posture::A, &g).unwrap().0, 0.6, 1e-4, 1000.0),
    ];
    let mut worst = 0.0f64;
    let mut worst_name = String::new();
    for (chain, q_half, theta_half, f_half) in &chains {
        for _ in 0..100 {
            let q = uniform(&mut rng, chain.n(), *q_half);
            let theta = uniform(&mut rng, chain.m(), *theta_half);
            let f = Vector6::from_fn(|i, _| rng.random_range(-f_half..=*f_half) * if i < 3 { 1.0 } else { 0.05 });
            let r = fd_validate(chain, &q, &theta, &f, 1e-6).expect("fd_validate");
            if r.max() > worst {
                worst = r.max();
                worst_name = chain.name().to_string();
            }
        }
    }
    let elapsed = t.elapsed();
    outcome(
        worst < 1e-5 && elapsed < Duration::from_secs(10),
        format!("300 states, worst relative deviation {worst:.2e} ({worst_name}), {elapsed:.2?}"),
    )
}

/// Equilibrium residual contract, closed forms and iteration counts.
fn criterion_2() -> Outcome {
    let settings = SolverSettings::default();
    let mut notes = Vec::new();
    let mut pass = true;

    let spring = models::single_spring(1000.0).unwrap();
    let q0 = DVector::zeros(0);
    let base = EquilibriumState::unloaded(&spring, &q0).unwrap().pose;
    let s = solve_equilibrium(&spring, &base.offset(&Twist6::new(0.002, 0.0, 0.0, 0.0, 0.0, 0.0)), (&q0, &DVector::zeros(1)), &settings).unwrap();
    let hooke = (s.f[0] - 2.0).abs().max((s.theta[0] - 0.002).abs());
    pass &= hooke < 1e-12;

    let series = models::series_springs(1000.0, 2000.0).unwrap();
    let base = EquilibriumState::unloaded(&series, &q0).unwrap().pose;
    let s = solve_equilibrium(&series, &base.offset(&Twist6::new(0.003, 0.0, 0.0, 0.0, 0.0, 0.0)), (&q0, &DVector::zeros(2)), &settings).unwrap();
    let series_err = (s.f[0] - 2.0).abs().max((s.theta[0] - 0.002).abs()).max((s.theta[1] - 0.001).abs());
    pass &= series_err < 1e-12;
    notes.push(format!("Hooke {hooke:.1e}, series {series_err:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_residual = 0.0f64;
    let mut solves = 0;
    let mut max_iter_away = 0;
    let mut away = 0;
    let g = OrthoglideGeometry::default();
    for p in Posture::ALL {
        let (chain, q) = orthoglide_chain(p, &g).unwrap();
        let start = EquilibriumState::unloaded(&chain, &q).unwrap();
        let lambda0 = stability_eigenvalue(&chain, &q, &start.theta, &start.f).unwrap().unwrap_or(0.0);
        for _ in 0..25 {
            let dir = Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0)).normalize();
            let magnitude = rng.random_range(0.05e-3..=1e-3);
            let d = dir * magnitude;
            let target = start.pose.offset(&Twist6::new(d.x, d.y, d.z, 0.0, 0.0, 0.0));
            let Ok(s) = solve_equilibrium(&chain, &target, (&start.q, &start.theta), &settings) else {
                continue;
            };
            let (rp, rs) = residuals(&chain, &s, &settings).unwrap();
            worst_residual = worst_residual.max(rp).max(rs);
            solves += 1;
            let lambda = stability_eigenvalue(&chain, &s.q, &s.theta, &s.f).unwrap().unwrap_or(0.0);
            if s.restarts == 0 && lambda > 0.5 * lambda0 {
                away += 1;
                max_iter_away = max_iter_away.max(s.iterations);
            }
        }
    }
    let planar = models::planar_2r().unwrap();
    for _ in 0..50 {
        let q = DVector::from_vec(vec![rng.random_range(0.3..=1.2), rng.random_range(0.3..=1.5)]);
        let start = EquilibriumState::unloaded(&planar, &q).unwrap();
        let off = Twist6::new(rng.random_range(-2e-3..=2e-3), rng.random_range(-2e-3..=2e-3), 0.0, 0.0, 0.0, rng.random_range(-0.01..=0.01));
        if let Ok(s) = solve_equilibrium(&planar, &start.pose.offset(&off), (&start.q, &start.theta), &settings) {
            let (rp, rs) = residuals(&planar, &s, &settings).unwrap();
            worst_residual = worst_residual.max(rp).max(rs);
            solves += 1;
        }
    }
    pass &= worst_residual < 1e-8 && solves >= 120 && away >= 50 && max_iter_away <= 5;
    notes.push(format!(
        "{solves} converged solves, worst residual {worst_residual:.1e}, max {max_iter_away} iterations over {away} leg solves ≤ 1 mm"
    ));
    outcome(pass, notes.join("; "))
}

/// Samples whose central-difference slope is compared with the tangent.
fn slope_errors(curve: &SweepCurve, critical: Option<usize>) -> (f64, usize) {
    let s = &curve.samples;
    let h = curve.step;
    let mut worst = 0.0f64;
    let mut used = 0;
    for i in 1..s.len().saturating_sub(1) {
        let near_critical = critical.is_some_and(|c| i.abs_diff(c) <= 10);
        let jump = s[i - 1..=i + 1].iter().any(|x| x.critical || x.restarts > 0);
        if near_critical || jump {
            continue;
        }
        let slope = (s[i + 1].force - s[i - 1].force) / (2.0 * h);
        worst = worst.max(rel(slope, s[i].tangent));
        used += 1;
    }
    (worst, used)
}

/// Loaded stiffness at zero load and tangent against curve slope.
fn criterion_3() -> Outcome {
    let t = Instant::now();
    let settings = SolverSettings::default();
    let g = OrthoglideGeometry::default();
    let mut zero_load = 0.0f64;
    let mut cases: Vec<(ChainModel, DVector<f64>)> = Posture::ALL.iter().map(|p| orthoglide_chain(*p, &g).unwrap()).collect();
    cases.push((models::planar_2r().unwrap(), DVector::from_vec(vec![0.4, 0.9])));
    cases.push((models::series_springs(1000.0, 2000.0).unwrap(), DVector::zeros(0)));
    for (chain, q) in &cases {
        let start = EquilibriumState::unloaded(chain, q).unwrap();
        let s = solve_equilibrium(chain, &start.pose, (&start.q, &start.theta), &settings).unwrap();
        let loaded = stiffness_loaded(chain, &s).unwrap();
        let unloaded = stiffness_unloaded(chain, q).unwrap();
        zero_load = zero_load.max((loaded.k - unloaded.k).norm() / unloaded.k.norm());
    }

    let mut worst_slope = 0.0f64;
    let mut used = 0;
    for p in Posture::ALL {
        let (chain, q) = orthoglide_chain(p, &g).unwrap();
        for sign in [1.0, -1.0] {
            let curve = sweep_from_zero(&chain, &q, &(x_dir() * sign), 4e-3, 1e-5);
            let r = detect_buckling(&curve, DEFAULT_DROP_FACTOR);
            let (w, u) = slope_errors(&curve, r.critical_index);
            worst_slope = worst_slope.max(w);
            used += u;
        }
    }
    let elapsed = t.elapsed();
    outcome(
        zero_load < 1e-10 && worst_slope < 0.01 && used > 2000 && elapsed < Duration::from_secs(60),
        format!(
            "zero-load difference {zero_load:.1e}; slope vs tangent worst {:.3}% over {used} samples of 8 leg sweeps; {elapsed:.2?}",
            100.0 * worst_slope
        ),
    )
}

/// Closed-form and converging buckling loads.
fn criterion_4() -> Outcome {
    let t = Instant::now();
    let (k, l) = (10.0, 1.0);
    let pendulum = models::pendulum_column(k, l, 1e5).unwrap();
    let curve = sweep_from_zero(&pendulum, &DVector::zeros(2), &(x_dir() * -1.0), 4e-4, 2e-6);
    let r = detect_buckling(&curve, DEFAULT_DROP_FACTOR);
    let pendulum_err = rel(r.f_cr, k / l);

    let exact = std::f64::consts::PI.powi(2) / 4.0;
    let mut errors = Vec::new();
    for n in [8, 16] {
        let column = models::euler_column(n, 1.0, 1.0, 1e4).unwrap();
        let curve = sweep_from_zero(&column, &DVector::zeros(2), &(x_dir() * -1.0), 1e-3, 2.5e-6);
        let r = detect_buckling(&curve, DEFAULT_DROP_FACTOR);
        errors.push(if r.detected { rel(r.f_cr, exact) } else { f64::INFINITY });
    }
    let elapsed = t.elapsed();
    outcome(
        r.detected && pendulum_err < 0.01 && errors[0] < 0.10 && errors[1] < errors[0] && elapsed < Duration::from_secs(60),
        format!(
            "pendulum F_cr {:.4} N ({:.2}%); Euler column error {:.2}% at 8 segments, {:.2}% at 16; {elapsed:.2?}",
            r.f_cr,
            100.0 * pendulum_err,
            100.0 * errors[0],
            100.0 * errors[1]
        ),
    )
}

/// Buckling of the reconstructed leg and posture ordering.
fn criterion_5() -> Outcome {
    let g = OrthoglideGeometry::default();
    let (chain, q) = orthoglide_chain(Posture::A, &g).unwrap();
    let curve = sweep_from_zero(&chain, &q, &x_dir(), 4e-3, 1e-6);
    let r = detect_buckling(&curve, DEFAULT_DROP_FACTOR);
    let ratio = r.k1 / r.k2;
    let order = (r.f_cr.log10() - 3.0).abs();
    let k0: Vec<f64> = Posture::ALL
        .iter()
        .map(|p| {
            let (c, q) = orthoglide_chain(*p, &g).unwrap();
            stiffness_unloaded(&c, &q).unwrap().k[(0, 0)]
        })
        .collect();
    let (a, b, c, d) = (k0[0], k0[1], k0[2], k0[3]);
    let ordering = c > a && a > d && d > b;
    outcome(
        curve.failure.is_none() && r.detected && ratio >= 10.0 && order <= 0.5 && ordering,
        format!(
            "A: {} samples, buckling at {:.3} mm, F_cr {:.0} N, K1/K2 = {:.0}; K0 (N/mm) C {:.0} > A {:.0} > D {:.0} > B {:.0}",
            curve.samples.len(),
            r.delta_cr * 1e3,
            r.f_cr,
            ratio,
            c / 1e3,
            a / 1e3,
            d / 1e3,
            b / 1e3
        ),
    )
}

/// Symmetry of every stiffness produced and definiteness of the mechanism.
fn criterion_6() -> Outcome {
    let g = OrthoglideGeometry::default();
    let mut worst_emitted = 0.0f64;
    let mut worst_raw = 0.0f64;
    let mut count = 0;
    let mut check = |k: &StiffnessResult| {
        let n = k.k.norm();
        worst_emitted = worst_emitted.max((k.k - k.k.transpose()).norm() / n);
        worst_raw = worst_raw.max(k.asymmetry);
        count += 1;
    };
    for p in Posture::ALL {
        let (chain, q) = orthoglide_chain(p, &g).unwrap();
        let curve = sweep_from_zero(&chain, &q, &x_dir(), 4e-3, 1e-5);
        for s in &curve.samples {
            check(&stiffness_loaded(&chain, &s.state).unwrap());
        }
    }
    let planar = models::planar_2r().unwrap();
    let q = DVector::from_vec(vec![0.4, 0.9]);
    for s in &sweep_from_zero(&planar, &q, &Twist6::new(0.6, 0.8, 0.0, 0.0, 0.0, 0.0), 2e-3, 2e-5).samples {
        check(&stiffness_loaded(&planar, &s.state).unwrap());
    }

    let legs = orthoglide_legs(Posture::A, &g).unwrap();
    let ks: Vec<StiffnessResult> = legs.iter().map(|(c, q)| stiffness_unloaded(c, q).unwrap()).collect();
    let mechanism = aggregate_parallel(&ks).unwrap();
    let pd = mechanism.spectrum[0] > 0.0;
    let mut leg_psd = true;
    for p in Posture::ALL {
        let (c, q) = orthoglide_chain(p, &g).unwrap();
        let k = stiffness_unloaded(&c, &q).unwrap();
        leg_psd &= k.spectrum[0] >= -1e-9 * k.spectrum[5] && k.spectrum[4] > 1e-6 * k.spectrum[5];
    }
    outcome(
        worst_emitted <= 1e-8 && worst_raw <= 1e-8 && pd && leg_psd,
        format!(
            "{count} matrices, asymmetry {worst_emitted:.1e} emitted / {worst_raw:.1e} before symmetrizing; three-leg eigenvalues {:.1} … {:.4e}; single legs PSD with two stiff directions: {leg_psd}",
            mechanism.spectrum[0], mechanism.spectrum[5]
        ),
    )
}

fn run_artifacts(dir: &std::path::Path) -> Vec<Vec<u8>> {
    let mut cfg = RunConfig::new(ChainSource::Orthoglide(Posture::A));
    cfg.settings.rng_seed = 7;
    let eq = cli::cmd_equilibrium(&cfg, &Twist6::new(5e-4, 0.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
    let sweep = cli::cmd_sweep(&cfg, &x_dir(), 4.0, 0.01).unwrap();
    cfg.format = Format::Csv;
    let grid: Vec<GridRange> = vec!["q1:-0.3:0.3:3".parse().unwrap(), "x:0:0.0005:2".parse().unwrap()];
    let points = cli::grid_points(&[0.0; 4], &grid).unwrap();
    let (_, map) = cli::cmd_map(&cfg, &points, &x_dir()).unwrap();
    let files = [("eq.json", eq.to_json().unwrap()), ("sweep.csv", sweep.csv), ("sweep.json", sweep.json), ("map.csv", map)];
    files
        .iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            cli::atomic_write(&path, text).unwrap();
            std::fs::read(&path).unwrap()
        })
        .collect()
}

/// Same configuration and seed give byte-identical artifacts.
fn criterion_7() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_artifacts(a.path());
    let second = run_artifacts(b.path());
    let bytes: usize = first.iter().map(Vec::len).sum();
    outcome(first == second, format!("{} artifacts, {bytes} bytes compared", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("differentiation correctness", criterion_1),
        ("equilibrium contract", criterion_2),
        ("loaded-stiffness consistency", criterion_3),
        ("buckling oracles", criterion_4),
        ("reconstructed leg buckling and ordering", criterion_5),
        ("symmetry and spectra", criterion_6),
        ("determinism", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({}) [{:.2?}]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} of 7 criteria failed");
        std::process::exit(1);
    }
    println!("all 7 criteria passed");
}
