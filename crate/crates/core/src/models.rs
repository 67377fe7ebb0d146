//! Reference chains with closed-form behaviour, used by tests and examples.
//!
//! Planar chains live in the xy plane and have no compliance out of it; their
//! stiffness matrices are zero in those directions.

use crate::chain::{ChainBuilder, ChainModel};
use crate::error::Result;
use crate::se3::Axis;

/// One prismatic spring along x.
pub fn single_spring(k: f64) -> Result<ChainModel> {
    ChainBuilder::new("single-spring").spring1(Axis::Tx, k).build()
}

/// Two prismatic springs in series along x.
pub fn series_springs(k1: f64, k2: f64) -> Result<ChainModel> {
    ChainBuilder::new("series-springs").spring1(Axis::Tx, k1).spring1(Axis::Tx, k2).build()
}

/// Planar arm with two passive revolute joints and compliant links.
///
/// `q = (q1, q2)`; seven spring coordinates.
pub fn planar_2r() -> Result<ChainModel> {
    ChainBuilder::new("planar-2r")
        .spring1(Axis::Rz, 400.0)
        .passive(Axis::Rz)
        .link(Axis::Tx, 0.4)
        .spring1(Axis::Tx, 2e5)
        .spring1(Axis::Ty, 5e3)
        .spring1(Axis::Rz, 150.0)
        .passive(Axis::Rz)
        .link(Axis::Tx, 0.3)
        .spring1(Axis::Tx, 1e5)
        .spring1(Axis::Ty, 3e3)
        .spring1(Axis::Rz, 80.0)
        .build()
}

/// Rigid link of length `length` on a base rotational spring `k`, with an
/// axial spring `axial_k` and a free tip rotation.
///
/// Under an axial compressive load `f` the lateral tip stiffness is
/// `k/L'² − f/L'` with `L' = length − f/axial_k`.
pub fn inverted_pendulum(k: f64, length: f64, axial_k: f64) -> Result<ChainModel> {
    ChainBuilder::new("inverted-pendulum")
        .spring1(Axis::Rz, k)
        .link(Axis::Tx, length)
        .spring1(Axis::Tx, axial_k)
        .passive(Axis::Rz)
        .build()
}

/// [`inverted_pendulum`] whose tip slides freely sideways, so prescribing
/// the axial position applies a dead axial load. Buckles at `k/length`.
pub fn pendulum_column(k: f64, length: f64, axial_k: f64) -> Result<ChainModel> {
    ChainBuilder::new("pendulum-column")
        .spring1(Axis::Rz, k)
        .link(Axis::Tx, length)
        .spring1(Axis::Tx, axial_k)
        .passive(Axis::Rz)
        .passive(Axis::Ty)
        .build()
}

/// Cantilever column of bending stiffness `ei` and length `length` lumped
/// into `segments` rigid elements joined at their midpoints by rotational
/// springs `segments·ei/length`. The tip slides sideways and rotates freely.
/// Buckling load tends to `π²·ei/(4·length²)`.
pub fn euler_column(segments: usize, ei: f64, length: f64, axial_k: f64) -> Result<ChainModel> {
    let n = segments.max(1) as f64;
    let h = length / n;
    let k = n * ei / length;
    let mut b = ChainBuilder::new(format!("euler-column-{segments}")).link(Axis::Tx, 0.5 * h);
    for i in 0..segments.max(1) {
        let seg = if i + 1 == segments.max(1) { 0.5 * h } else { h };
        b = b.spring1(Axis::Rz, k).link(Axis::Tx, seg);
    }
    b.spring1(Axis::Tx, axial_k).passive(Axis::Rz).passive(Axis::Ty).build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn dimensions() {
        assert_eq!((planar_2r().unwrap().n(), planar_2r().unwrap().m()), (2, 7));
        let e = euler_column(8, 1.0, 1.0, 1e3).unwrap();
        assert_eq!((e.n(), e.m()), (2, 9));
        let tip = crate::chain::forward_kinematics(&e, &DVector::zeros(2), &DVector::zeros(9)).unwrap();
        assert!((tip.position.x - 1.0).abs() < 1e-15);
    }
}
