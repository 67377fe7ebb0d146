//! Loaded equilibrium of a planar two-link arm pushed off its unloaded pose.

use nalgebra::DVector;
use vjmstiff::*;

fn main() -> Result<()> {
    let chain = models::planar_2r()?;
    let start = EquilibriumState::unloaded(&chain, &DVector::from_vec(vec![0.6, 0.9]))?;
    let settings = SolverSettings::default();
    for dy in [1e-3, 5e-3, 2e-2] {
        let target = start.pose.offset(&Twist6::new(0.0, dy, 0.0, 0.0, 0.0, 0.0));
        let s = solve_equilibrium(&chain, &target, (&start.q, &start.theta), &settings)?;
        let (rp, rs) = residuals(&chain, &s, &settings)?;
        println!(
            "Δy = {dy:.0e} m: F = ({:.3}, {:.3}) N, M = {:.3} N·m, {} iterations, residuals {rp:.1e}/{rs:.1e}, energy {:.4e} J",
            s.f[0],
            s.f[1],
            s.f[5],
            s.iterations,
            s.energy(&chain)
        );
        println!("  q = {:.6?}, θ = [{}]", s.q.as_slice(), s.theta.iter().map(|t| format!("{t:.3e}")).collect::<Vec<_>>().join(", "));
    }
    Ok(())
}
