//! Loads a chain description, evaluates its pose and first derivatives.
//!
//! `cargo run --example forward_kinematics -- examples/chains/planar_2r.json 0.6 0.9`

use nalgebra::DVector;
use vjmstiff::*;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/chains/planar_2r.json").into());
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let chain = parse_chain(&text)?;
    let values: Vec<f64> = args.map(|a| a.parse().expect("numeric joint value")).collect();
    let q = DVector::from_fn(chain.n(), |i, _| values.get(i).copied().unwrap_or(0.0));
    let theta = DVector::zeros(chain.m());

    let pose = forward_kinematics(&chain, &q, &theta)?;
    println!("{}: n = {}, m = {}", chain.name(), chain.n(), chain.m());
    println!("position {:.6?}", pose.position.as_slice());
    println!("orientation{:.6}", pose.orientation);
    let jac = jacobians(&chain, &q, &theta)?;
    println!("J_θ (6×{}){:.4}", chain.m(), jac.j_theta);
    println!("J_q (6×{}){:.4}", chain.n(), jac.j_q);
    Ok(())
}
