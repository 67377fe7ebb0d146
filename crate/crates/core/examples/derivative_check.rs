//! Compares analytic Jacobians and load Hessians with central differences
//! at random loaded states.

use nalgebra::{DVector, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vjmstiff::analysis::{orthoglide_chain, OrthoglideGeometry, Posture};
use vjmstiff::*;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (leg, _) = orthoglide_chain(Posture::A, &OrthoglideGeometry::default())?;
    for chain in [models::planar_2r()?, models::euler_column(4, 1.0, 1.0, 1e4)?, leg] {
        let mut worst = FdReport::default();
        for _ in 0..20 {
            let q = DVector::from_fn(chain.n(), |_, _| rng.random_range(-1.0..1.0));
            let theta = DVector::from_fn(chain.m(), |_, _| rng.random_range(-1e-3..1e-3));
            let f = Vector6::from_fn(|i, _| rng.random_range(-1.0..1.0) * if i < 3 { 1e3 } else { 10.0 });
            let r = fd_validate(&chain, &q, &theta, &f, 1e-6)?;
            if r.max() > worst.max() {
                worst = r;
            }
        }
        println!(
            "{:<16} worst relative deviation: Jacobians {:.2e}, Hessians {:.2e}",
            chain.name(),
            worst.max_jacobian(),
            worst.max_hessian()
        );
    }
    Ok(())
}
