//! One leg of an Orthoglide-type translational parallel manipulator.
//!
//! ```text
//! T_base · Tx(a) · Tx(θ_a) · F·V(θ_foot)·F⁻¹ · Ry(q1) · Rz(q2) · Tx(L) · V(θ_link) · Rz(q3) · Ry(q4) · T_tool
//! ```
//!
//! `V` is the six-factor spring transform, `F` rotates the foot compliance
//! frame into the leg frame. The foot compliance is `FOOT_COMPLIANCE`, the
//! link stiffness is twice the inverse of `BAR_COMPLIANCE` (two bars of a
//! parallelogram in parallel). Both are given in mm, N, rad units.
//!
//! Bar length, actuator stiffness, base and tool offsets and the foot frame
//! are not known for the physical machine; the defaults are marked
//! [`OrthoglideGeometry::ASSUMED`].

use std::f64::consts::FRAC_PI_6;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainDocument, ChainModel, ComplianceUnits, ElementSpec};
use crate::error::{Error, Result};
use crate::se3::{Axis, Transform};

/// Foot compliance, mm/N, rad/(N·mm), 1/N.
pub const FOOT_COMPLIANCE: [[f64; 6]; 6] = [
    [28e-5, -33e-5, 0.0, 0.0, 0.0, -40e-7],
    [-33e-5, 41e-5, 0.0, 0.0, 0.0, 54e-7],
    [0.0, 0.0, 19e-4, 11e-6, -15e-6, 0.0],
    [0.0, 0.0, 11e-6, 23e-8, 0.0, 0.0],
    [0.0, 0.0, -15e-6, 0.0, 23e-8, 0.0],
    [-40e-7, 54e-7, 0.0, 0.0, 0.0, 84e-9],
];

/// Single-bar compliance, same units. Not exactly symmetric as published;
/// symmetrized on load.
pub const BAR_COMPLIANCE: [[f64; 6]; 6] = [
    [46e-6, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 23e-2, 0.0, 0.0, 0.0, 11e-5],
    [0.0, 0.0, 51e-3, 0.0, -24e-5, 0.0],
    [0.0, 0.0, 0.0, 29e-6, 0.0, 0.0],
    [0.0, 0.0, -24e-5, 0.0, 15e-7, 0.0],
    [0.0, 11e-4, 0.0, 0.0, 0.0, 72e-7],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Posture {
    A,
    B,
    C,
    D,
}

impl Posture {
    pub const ALL: [Posture; 4] = [Posture::A, Posture::B, Posture::C, Posture::D];

    /// Passive joint values `(q1, q2, q3, q4)`.
    pub fn joints(self) -> [f64; 4] {
        let a = FRAC_PI_6;
        match self {
            Posture::A => [0.0, 0.0, 0.0, 0.0],
            Posture::B => [0.0, a, -a, 0.0],
            Posture::C => [a, 0.0, 0.0, -a],
            Posture::D => [a, a, -a, -a],
        }
    }
}

impl fmt::Display for Posture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Posture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Posture::A),
            "B" => Ok(Posture::B),
            "C" => Ok(Posture::C),
            "D" => Ok(Posture::D),
            other => Err(Error::invalid(format!("unknown posture `{other}` (expected A, B, C or D)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoglideGeometry {
    /// Bar length, m.
    pub bar_length: f64,
    /// Actuator drive stiffness, N/m.
    pub actuator_stiffness: f64,
    /// Factor applied to the bar stiffness for the parallelogram.
    pub parallelogram_factor: f64,
    /// Row-major base transform.
    pub base: [[f64; 4]; 4],
    /// Row-major tool transform.
    pub tool: [[f64; 4]; 4],
    /// Rotation about x from the leg frame into the foot compliance frame, rad.
    pub foot_frame_rx: f64,
    /// Names of the fields above that are assumed rather than measured.
    pub assumed: Vec<String>,
}

impl OrthoglideGeometry {
    pub const ASSUMED: [&'static str; 5] = ["bar_length", "actuator_stiffness", "base", "tool", "foot_frame_rx"];
}

impl Default for OrthoglideGeometry {
    fn default() -> Self {
        let bar_length = 0.31;
        Self {
            bar_length,
            actuator_stiffness: 1e8,
            parallelogram_factor: 2.0,
            // puts the end-effector at the origin in posture A
            base: Transform::elementary_unchecked(Axis::Tx, -bar_length).to_row_major(),
            tool: Transform::identity().to_row_major(),
            foot_frame_rx: -std::f64::consts::FRAC_PI_2,
            assumed: Self::ASSUMED.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl OrthoglideGeometry {
    /// Chain description with `prefix` before the base and `suffix` after
    /// the tool.
    pub fn document(&self, name: &str, prefix: Option<[[f64; 4]; 4]>, suffix: Option<[[f64; 4]; 4]>) -> ChainDocument {
        let rigid = |m: [[f64; 4]; 4]| ElementSpec::Rigid {
            matrix: Some(m),
            factors: None,
        };
        let passive = |axis| ElementSpec::Passive { axis, index: None };
        let mut elements = Vec::new();
        if let Some(p) = prefix {
            elements.push(rigid(p));
        }
        elements.extend([
            rigid(self.base),
            ElementSpec::Actuated {
                axis: Axis::Tx,
                value: 0.0,
            },
            ElementSpec::Spring1 {
                axis: Axis::Tx,
                k: self.actuator_stiffness,
                index: None,
            },
            ElementSpec::rigid_factors(&[(Axis::Rx, self.foot_frame_rx)]),
            ElementSpec::Spring6 {
                compliance: Some("foot".into()),
                stiffness: None,
                scale: None,
                index: None,
            },
            ElementSpec::rigid_factors(&[(Axis::Rx, -self.foot_frame_rx)]),
            passive(Axis::Ry),
            passive(Axis::Rz),
            ElementSpec::rigid_factors(&[(Axis::Tx, self.bar_length)]),
            ElementSpec::Spring6 {
                compliance: Some("bar".into()),
                stiffness: None,
                scale: Some(self.parallelogram_factor),
                index: None,
            },
            passive(Axis::Rz),
            passive(Axis::Ry),
            rigid(self.tool),
        ]);
        if let Some(s) = suffix {
            elements.push(rigid(s));
        }
        ChainDocument {
            name: name.into(),
            compliance_units: ComplianceUnits::Mm,
            compliance_matrices: [("foot".to_string(), FOOT_COMPLIANCE), ("bar".to_string(), BAR_COMPLIANCE)]
                .into_iter()
                .collect(),
            elements,
        }
    }
}

/// One leg with the passive joints of `posture`.
pub fn orthoglide_chain(posture: Posture, geometry: &OrthoglideGeometry) -> Result<(ChainModel, DVector<f64>)> {
    let chain = geometry.document("orthoglide-leg", None, None).build()?;
    Ok((chain, DVector::from_row_slice(&posture.joints())))
}

/// Rotation taking x to y, y to z and z to x.
fn cyclic(power: usize) -> Matrix3<f64> {
    let p = Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    (0..power).fold(Matrix3::identity(), |acc, _| p * acc)
}

/// Three legs along x, y and z sharing the end-effector at the origin in
/// posture A. Each leg is the first one conjugated by an axis permutation.
pub fn orthoglide_legs(posture: Posture, geometry: &OrthoglideGeometry) -> Result<Vec<(ChainModel, DVector<f64>)>> {
    (0..3)
        .map(|i| {
            let r = cyclic(i);
            let pre = Transform::from_parts(&r, &Vector3::zeros())?;
            let post = pre.inverse();
            let doc = geometry.document(
                &format!("orthoglide-leg-{}", ["x", "y", "z"][i]),
                (i > 0).then(|| pre.to_row_major()),
                (i > 0).then(|| post.to_row_major()),
            );
            Ok((doc.build()?, DVector::from_row_slice(&posture.joints())))
        })
        .collect()
}
