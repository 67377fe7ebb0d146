//! Homogeneous-transform arithmetic.
//!
//! Everything here works in the base (world) frame. A [`Twist6`] is the
//! 6-vector `(δx, δy, δz, δφx, δφy, δφz)`: translation of the reference point
//! in meters followed by a rotation vector in radians, both in world
//! coordinates.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Small displacement screw: translation (m) then rotation vector (rad).
pub type Twist6 = Vector6<f64>;

/// Elementary transform axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Tx,
    Ty,
    Tz,
    Rx,
    Ry,
    Rz,
}

impl Axis {
    pub const ALL: [Axis; 6] = [Axis::Tx, Axis::Ty, Axis::Tz, Axis::Rx, Axis::Ry, Axis::Rz];

    pub fn is_rotation(self) -> bool {
        matches!(self, Axis::Rx | Axis::Ry | Axis::Rz)
    }

    /// Unit direction of the axis in the local frame.
    pub fn unit(self) -> Vector3<f64> {
        match self {
            Axis::Tx | Axis::Rx => Vector3::x(),
            Axis::Ty | Axis::Ry => Vector3::y(),
            Axis::Tz | Axis::Rz => Vector3::z(),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Tx" => Ok(Axis::Tx),
            "Ty" => Ok(Axis::Ty),
            "Tz" => Ok(Axis::Tz),
            "Rx" => Ok(Axis::Rx),
            "Ry" => Ok(Axis::Ry),
            "Rz" => Ok(Axis::Rz),
            other => Err(Error::invalid(format!("unknown axis `{other}`"))),
        }
    }
}

/// 4×4 homogeneous transform with an orthonormal rotation block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform(Matrix4<f64>);

impl Transform {
    pub fn identity() -> Self {
        Transform(Matrix4::identity())
    }

    /// Builds a transform from a rotation and a translation without touching
    /// the rotation block.
    pub(crate) fn from_parts_unchecked(rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(translation);
        Transform(m)
    }

    /// Builds a transform from raw rotation/translation data. The rotation
    /// block is projected onto SO(3) (nearest rotation in the Frobenius sense).
    pub fn from_parts(rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite transform entry"));
        }
        let r = orthonormalize(rotation)?;
        Ok(Self::from_parts_unchecked(&r, translation))
    }

    /// Builds a transform from a raw 4×4 matrix (row-major), re-orthonormalizing
    /// the rotation block. The bottom row must be `(0, 0, 0, 1)`.
    pub fn from_row_major(rows: &[[f64; 4]; 4]) -> Result<Self> {
        if rows[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::invalid("bottom row of a homogeneous transform must be (0,0,0,1)"));
        }
        let r = Matrix3::from_fn(|i, j| rows[i][j]);
        let p = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        Self::from_parts(&r, &p)
    }

    pub fn translation_of(p: Vector3<f64>) -> Self {
        Self::from_parts_unchecked(&Matrix3::identity(), &p)
    }

    /// Standard elementary translation or rotation about a local axis.
    pub fn elementary(axis: Axis, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid(format!("non-finite {axis} parameter")));
        }
        Ok(Self::elementary_unchecked(axis, value))
    }

    pub(crate) fn elementary_unchecked(axis: Axis, value: f64) -> Self {
        let mut m = Matrix4::identity();
        match axis {
            Axis::Tx => m[(0, 3)] = value,
            Axis::Ty => m[(1, 3)] = value,
            Axis::Tz => m[(2, 3)] = value,
            Axis::Rx | Axis::Ry | Axis::Rz => {
                let (s, c) = value.sin_cos();
                let (a, b) = match axis {
                    Axis::Rx => (1, 2),
                    Axis::Ry => (2, 0),
                    _ => (0, 1),
                };
                m[(a, a)] = c;
                m[(a, b)] = -s;
                m[(b, a)] = s;
                m[(b, b)] = c;
            }
        }
        Transform(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn pose(&self) -> Pose {
        Pose {
            position: self.translation(),
            orientation: self.rotation(),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }

    /// Rigid inverse.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation().transpose();
        Self::from_parts_unchecked(&rt, &(-(rt * self.translation())))
    }

    /// Orthonormality and bottom-row check.
    pub fn is_valid(&self, tol: f64) -> bool {
        let r = self.rotation();
        let bottom = self.0.row(3);
        bottom[0] == 0.0
            && bottom[1] == 0.0
            && bottom[2] == 0.0
            && bottom[3] == 1.0
            && (r * r.transpose() - Matrix3::identity()).amax() <= tol
            && (r.determinant() - 1.0).abs() <= tol
    }

    /// Row-major copy of the 4×4 matrix.
    pub fn to_row_major(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[(i, j)];
            }
        }
        out
    }
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        Transform(self.0 * rhs.0)
    }
}

impl Mul<&Transform> for &Transform {
    type Output = Transform;

    fn mul(self, rhs: &Transform) -> Transform {
        Transform(self.0 * rhs.0)
    }
}

/// Six-parameter virtual spring transform
/// `Tx(θx)·Ty(θy)·Tz(θz)·Rx(θφx)·Ry(θφy)·Rz(θφz)`.
pub fn spring_transform(theta: &[f64; 6]) -> Result<Transform> {
    let mut t = Transform::identity();
    for (axis, v) in Axis::ALL.iter().zip(theta) {
        t = t * Transform::elementary(*axis, *v)?;
    }
    Ok(t)
}

/// End-effector location: position (m) and orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Matrix3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            position: Vector3::zeros(),
            orientation: Matrix3::identity(),
        }
    }

    pub fn to_transform(&self) -> Transform {
        Transform::from_parts_unchecked(&self.orientation, &self.position)
    }

    /// Pose displaced by a twist: translation added, rotation pre-multiplied
    /// by `exp(δφ)` in the world frame. Inverse of [`pose_diff`].
    pub fn offset(&self, twist: &Twist6) -> Pose {
        let dp = Vector3::new(twist[0], twist[1], twist[2]);
        let dr = Vector3::new(twist[3], twist[4], twist[5]);
        Pose {
            position: self.position + dp,
            orientation: rotation_exp(&dr) * self.orientation,
        }
    }
}

/// Twist taking `t1` to `t2`: `(p2 − p1, log(R2·R1ᵀ))`.
pub fn pose_diff(t2: &Pose, t1: &Pose) -> Result<Twist6> {
    let dp = t2.position - t1.position;
    let rel = t2.orientation * t1.orientation.transpose();
    let w = rotation_log(&rel)?;
    Ok(Twist6::new(dp.x, dp.y, dp.z, w.x, w.y, w.z))
}

/// Rotation vector of a rotation matrix. Angles at or beyond π (up to a
/// 1e-6 margin) are rejected since the axis becomes ambiguous there.
pub fn rotation_log(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let s = v.norm();
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = s.atan2(c);
    if angle >= PI - 1e-6 {
        return Err(Error::RotationTooLarge { angle });
    }
    // θ/sin θ, series for small angles
    let scale = if s < 1e-6 {
        1.0 + angle * angle / 6.0
    } else {
        angle / s
    };
    Ok(v * scale)
}

/// Rodrigues' formula.
pub fn rotation_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let angle = w.norm();
    let k = skew(w);
    let (a, b) = if angle < 1e-6 {
        let a2 = angle * angle;
        (1.0 - a2 / 6.0, 0.5 - a2 / 24.0)
    } else {
        (angle.sin() / angle, (1.0 - angle.cos()) / (angle * angle))
    };
    Matrix3::identity() + k * a + k * k * b
}

pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn orthonormalize(r: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = r.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::invalid("rotation block SVD failed")),
    };
    let mut q = u * vt;
    if q.determinant() < 0.0 {
        return Err(Error::invalid("rotation block is a reflection"));
    }
    if (q - r).amax() > 1e-3 {
        return Err(Error::invalid("rotation block is far from orthonormal"));
    }
    // one Newton polish step keeps q on SO(3) to roundoff
    q = (q + q.transpose().try_inverse().unwrap_or(q)) * 0.5;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn naive_product(factors: &[Matrix4<f64>]) -> Matrix4<f64> {
        let mut acc = [[0.0f64; 4]; 4];
        for (i, row) in acc.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for f in factors {
            let mut next = [[0.0f64; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    for (k, a) in acc[i].iter().enumerate() {
                        next[i][j] += a * f[(k, j)];
                    }
                }
            }
            acc = next;
        }
        Matrix4::from_fn(|i, j| acc[i][j])
    }

    fn raw_elementary(axis: Axis, v: f64) -> Matrix4<f64> {
        let (s, c) = (v.sin(), v.cos());
        match axis {
            Axis::Tx => Matrix4::new(1., 0., 0., v, 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.),
            Axis::Ty => Matrix4::new(1., 0., 0., 0., 0., 1., 0., v, 0., 0., 1., 0., 0., 0., 0., 1.),
            Axis::Tz => Matrix4::new(1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., v, 0., 0., 0., 1.),
            Axis::Rx => Matrix4::new(1., 0., 0., 0., 0., c, -s, 0., 0., s, c, 0., 0., 0., 0., 1.),
            Axis::Ry => Matrix4::new(c, 0., s, 0., 0., 1., 0., 0., -s, 0., c, 0., 0., 0., 0., 1.),
            Axis::Rz => Matrix4::new(c, -s, 0., 0., s, c, 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.),
        }
    }

    #[test]
    fn elementary_zero_is_identity() {
        for axis in Axis::ALL {
            assert_eq!(Transform::elementary(axis, 0.0).unwrap(), Transform::identity());
        }
    }

    #[test]
    fn quarter_turn_about_z() {
        let t = Transform::elementary(Axis::Rz, FRAC_PI_2).unwrap();
        let p = t.transform_point(&Vector3::x());
        assert!((p - Vector3::y()).amax() < 1e-15);
    }

    #[test]
    fn pure_translation_moves_origin() {
        let t = Transform::elementary(Axis::Ty, 0.074).unwrap();
        assert_eq!(t.transform_point(&Vector3::zeros()), Vector3::new(0.0, 0.074, 0.0));
    }

    #[test]
    fn elementary_rejects_nan() {
        assert!(Transform::elementary(Axis::Rx, f64::NAN).is_err());
        assert!(spring_transform(&[0.0, f64::INFINITY, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn spring_transform_examples() {
        assert_eq!(spring_transform(&[0.0; 6]).unwrap(), Transform::identity());
        let t = spring_transform(&[1.0, 2.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.rotation(), Matrix3::identity());
        assert_eq!(t.translation(), Vector3::new(1.0, 2.0, 3.0));

        let theta = [0.01, 0.02, 0.03, 0.1, 0.2, 0.3];
        let factors: Vec<_> = Axis::ALL
            .iter()
            .zip(theta)
            .map(|(a, v)| raw_elementary(*a, v))
            .collect();
        let oracle = naive_product(&factors);
        let t = spring_transform(&theta).unwrap();
        assert!((t.matrix() - oracle).amax() < 1e-15);
    }

    #[test]
    fn translation_spring_cancels_with_negation() {
        let a = spring_transform(&[0.3, -0.2, 0.7, 0.0, 0.0, 0.0]).unwrap();
        let b = spring_transform(&[-0.3, 0.2, -0.7, 0.0, 0.0, 0.0]).unwrap();
        assert!(((a * b).matrix() - Matrix4::identity()).amax() < 1e-14);
    }

    #[test]
    fn rotated_spring_does_not_cancel() {
        let th = [0.0, 0.0, 0.0, 0.3, 0.4, 0.5];
        let neg = th.map(|v| -v);
        let p = spring_transform(&th).unwrap() * spring_transform(&neg).unwrap();
        assert!((p.matrix() - Matrix4::identity()).amax() > 1e-3);
    }

    #[test]
    fn pose_diff_examples() {
        let base = spring_transform(&[0.1, 0.2, 0.3, 0.4, -0.5, 0.6]).unwrap().pose();
        assert_eq!(pose_diff(&base, &base).unwrap(), Twist6::zeros());

        let mut shifted = base;
        shifted.position.x += 0.001;
        let d = pose_diff(&shifted, &base).unwrap();
        assert!((d - Twist6::new(0.001, 0.0, 0.0, 0.0, 0.0, 0.0)).amax() < 1e-15);

        let rz = Transform::elementary(Axis::Rz, 1e-3).unwrap().rotation();
        let rotated = Pose {
            position: base.position,
            orientation: rz * base.orientation,
        };
        let d = pose_diff(&rotated, &base).unwrap();
        assert!((d - Twist6::new(0.0, 0.0, 0.0, 0.0, 0.0, 1e-3)).amax() < 1e-9);
    }

    #[test]
    fn pose_diff_rejects_half_turn() {
        let a = Pose::identity();
        let b = Transform::elementary(Axis::Rx, PI).unwrap().pose();
        assert!(matches!(pose_diff(&b, &a), Err(Error::RotationTooLarge { .. })));
    }

    #[test]
    fn exp_log_roundtrip() {
        for w in [
            Vector3::new(0.3, -0.2, 0.1),
            Vector3::new(1e-9, 0.0, -2e-9),
            Vector3::new(0.0, 2.5, 0.0),
        ] {
            let back = rotation_log(&rotation_exp(&w)).unwrap();
            assert!((back - w).amax() < 1e-12, "{w:?} -> {back:?}");
        }
    }

    #[test]
    fn from_parts_orthonormalizes() {
        let r = Transform::elementary(Axis::Ry, 0.3).unwrap().rotation();
        let noisy = r + Matrix3::from_element(1e-7);
        let t = Transform::from_parts(&noisy, &Vector3::zeros()).unwrap();
        assert!(t.is_valid(1e-12));
        assert!((t.rotation() - r).amax() < 1e-6);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let t = spring_transform(&[0.1, -0.4, 0.2, 0.7, 0.1, -0.3]).unwrap();
        assert!(((t * t.inverse()).matrix() - Matrix4::identity()).amax() < 1e-14);
    }
}
