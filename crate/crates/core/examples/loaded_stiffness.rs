//! Unloaded against loaded stiffness of a pinned-tip pendulum under growing
//! axial compression. The lateral tip stiffness falls as `k/L'² − f/L'`.

use nalgebra::DVector;
use vjmstiff::*;

fn main() -> Result<()> {
    let (k, l, ka) = (10.0, 1.0, 1e4);
    let pendulum = models::inverted_pendulum(k, l, ka)?;
    let q0 = DVector::zeros(pendulum.n());
    let unloaded = stiffness_unloaded(&pendulum, &q0)?;
    println!("unloaded spectrum [{}]", unloaded.spectrum.map(|e| format!("{e:.4e}")).join(", "));
    let start = EquilibriumState::unloaded(&pendulum, &q0)?;
    let settings = SolverSettings::default();
    let lateral = Twist6::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
    for u in [0.0, 2e-4, 5e-4, 9e-4] {
        let target = start.pose.offset(&Twist6::new(-u, 0.0, 0.0, 0.0, 0.0, 0.0));
        let s = solve_equilibrium(&pendulum, &target, (&start.q, &start.theta), &settings)?;
        let kf = stiffness_loaded(&pendulum, &s)?;
        let f = -s.f[0];
        let len = l - f / ka;
        println!(
            "shortening {u:.0e} m: axial load {f:.3} N, lateral stiffness {:.6} N/m (closed form {:.6}), asymmetry {:.1e}",
            kf.directional(&lateral),
            k / (len * len) - f / len,
            kf.asymmetry
        );
    }
    Ok(())
}
