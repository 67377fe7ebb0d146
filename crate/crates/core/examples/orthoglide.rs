//! Orthoglide leg: unloaded stiffness per posture, buckling under a push
//! along x and the three-leg aggregate at the isotropic posture.
//!
//! `cargo run --release --example orthoglide -- leg.json` also writes the
//! posture A leg description.

use vjmstiff::analysis::{orthoglide_chain, orthoglide_legs, OrthoglideGeometry, Posture, DEFAULT_DROP_FACTOR};
use vjmstiff::*;

fn main() -> Result<()> {
    let g = OrthoglideGeometry::default();
    println!("assumed geometry: {}", g.assumed.join(", "));
    let push = Twist6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in Posture::ALL {
        let (chain, q) = orthoglide_chain(p, &g)?;
        let start = EquilibriumState::unloaded(&chain, &q)?;
        let curve = displacement_sweep(&chain, &start, &push, 4e-3, 1e-5, &SolverSettings::default())?;
        let r = detect_buckling(&curve, DEFAULT_DROP_FACTOR);
        println!(
            "posture {p}: K0 = {:7.0} N/mm, buckling {} at {:.3} mm, F_cr = {:.0} N, K1/K2 = {:.1}",
            r.k0 / 1e3,
            r.detected,
            r.delta_cr * 1e3,
            r.f_cr,
            r.k1 / r.k2
        );
    }
    let legs = orthoglide_legs(Posture::A, &g)?
        .iter()
        .map(|(c, q)| stiffness_unloaded(c, q))
        .collect::<Result<Vec<_>>>()?;
    let k = aggregate_parallel(&legs)?;
    println!("three legs at A: spectrum [{}]", k.spectrum.map(|e| format!("{e:.4e}")).join(", "));

    if let Some(path) = std::env::args().nth(1) {
        let doc = g.document("orthoglide-leg", None, None);
        std::fs::write(&path, doc.to_json()?).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        println!("wrote {path}");
    }
    Ok(())
}
