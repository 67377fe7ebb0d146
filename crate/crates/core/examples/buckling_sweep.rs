//! Force-displacement sweep of a pendulum column into buckling; the
//! critical load is `k/L`.

use nalgebra::DVector;
use vjmstiff::analysis::DEFAULT_DROP_FACTOR;
use vjmstiff::*;

fn main() -> Result<()> {
    let (k, l) = (10.0, 1.0);
    let column = models::pendulum_column(k, l, 1e5)?;
    let start = EquilibriumState::unloaded(&column, &DVector::zeros(2))?;
    let compress = Twist6::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let curve = displacement_sweep(&column, &start, &compress, 5e-3, 1e-5, &SolverSettings::default())?;
    for s in curve.samples.iter().step_by(50) {
        println!("Δ = {:.2e} m  F = {:8.4} N  k = {:10.3} N/m  tilt = {:+.4} rad", s.delta, s.force, s.tangent, s.state.theta[0]);
    }
    let r = detect_buckling(&curve, DEFAULT_DROP_FACTOR);
    println!(
        "detected {} ({:?}): F_cr = {:.4} N (k/L = {:.4}), Δ_cr = {:.3e} m, K1 = {:.3e}, K2 = {:.3e} N/m",
        r.detected,
        r.detection,
        r.f_cr,
        k / l,
        r.delta_cr,
        r.k1,
        r.k2
    );
    Ok(())
}
