//! Jacobians of the end-effector pose and Hessians of the wrench-weighted
//! pose, with a central-difference validator.
//!
//! Column `k` of a Jacobian is the world-frame screw of coordinate `k`
//! referred to the end-effector point: `(u, 0)` for a prismatic factor with
//! axis `u`, `(u × (p_end − p_joint), u)` for a revolute one.
//!
//! The Hessians are second derivatives of `φ(c) = Fᵀ·pose_diff(g(c), g(c₀))`
//! at `c = c₀`. For two factors `a` before `b` in the chain product (screws
//! `ω`, `v`), with `F = (f, τ)`:
//!
//! ```text
//! ∂²φ/∂a∂b = f·(ω_a × v_b) + ½ τ·(ω_a × ω_b)
//! ∂²φ/∂a²  = f·(ω_a × v_a)
//! ```
//!
//! The translational term is the exact second derivative of the end point.
//! The rotational term is the symmetric part of the derivative of `τᵀω_b`;
//! the antisymmetric half cancels against the second-order term of the
//! rotation logarithm.

use nalgebra::{DMatrix, DVector, Vector3, Vector6};

use crate::chain::{ChainModel, Kinematics, Screw};
use crate::error::{check_len, Error, Result};
use crate::se3::{pose_diff, Twist6};

/// Pose sensitivities at `(q, θ)`.
#[derive(Debug, Clone)]
pub struct JacobianPair {
    /// 6 × m.
    pub j_theta: DMatrix<f64>,
    /// 6 × n.
    pub j_q: DMatrix<f64>,
    pub q: DVector<f64>,
    pub theta: DVector<f64>,
}

/// Second derivatives of `Fᵀ·g(q, θ)`.
#[derive(Debug, Clone)]
pub struct HessianSet {
    pub h_qq: DMatrix<f64>,
    /// n × m.
    pub h_q_theta: DMatrix<f64>,
    pub h_theta_theta: DMatrix<f64>,
    pub q: DVector<f64>,
    pub theta: DVector<f64>,
    pub wrench: Vector6<f64>,
}

impl HessianSet {
    /// `H_θq = H_qθᵀ`.
    pub fn h_theta_q(&self) -> DMatrix<f64> {
        self.h_q_theta.transpose()
    }

    /// Assembled `(n+m)²` Hessian ordered `[q, θ]`.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.h_qq.nrows();
        let m = self.h_theta_theta.nrows();
        let mut h = DMatrix::zeros(n + m, n + m);
        h.view_mut((0, 0), (n, n)).copy_from(&self.h_qq);
        h.view_mut((0, n), (n, m)).copy_from(&self.h_q_theta);
        h.view_mut((n, 0), (m, n)).copy_from(&self.h_q_theta.transpose());
        h.view_mut((n, n), (m, m)).copy_from(&self.h_theta_theta);
        h
    }
}

pub(crate) fn jacobian_matrix(screws: &[Screw], end_point: &Vector3<f64>) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(6, screws.len());
    for (c, s) in screws.iter().enumerate() {
        j.set_column(c, &DVector::from_column_slice(s.column(end_point).as_slice()));
    }
    j
}

pub(crate) fn jacobians_from(kin: &Kinematics, q: &DVector<f64>, theta: &DVector<f64>) -> JacobianPair {
    let p = kin.end.translation();
    JacobianPair {
        j_theta: jacobian_matrix(&kin.theta_screws, &p),
        j_q: jacobian_matrix(&kin.q_screws, &p),
        q: q.clone(),
        theta: theta.clone(),
    }
}

/// Analytic Jacobians `J_θ`, `J_q`.
pub fn jacobians(chain: &ChainModel, q: &DVector<f64>, theta: &DVector<f64>) -> Result<JacobianPair> {
    let kin = chain.evaluate(q, theta)?;
    Ok(jacobians_from(&kin, q, theta))
}

pub(crate) fn hessians_from(
    kin: &Kinematics,
    q: &DVector<f64>,
    theta: &DVector<f64>,
    wrench: &Vector6<f64>,
) -> HessianSet {
    let n = kin.q_screws.len();
    let m = kin.theta_screws.len();
    let p = kin.end.translation();
    let force = Vector3::new(wrench[0], wrench[1], wrench[2]);
    let torque = Vector3::new(wrench[3], wrench[4], wrench[5]);
    let all: Vec<(Screw, Twist6)> = kin
        .q_screws
        .iter()
        .chain(&kin.theta_screws)
        .map(|s| (*s, s.column(&p)))
        .collect();

    let mut h = DMatrix::zeros(n + m, n + m);
    if *wrench != Vector6::zeros() {
        for i in 0..all.len() {
            for j in i..all.len() {
                let (first, second) = if all[i].0.order <= all[j].0.order {
                    (&all[i], &all[j])
                } else {
                    (&all[j], &all[i])
                };
                let w_a = first.0.omega();
                let v_b = Vector3::new(second.1[0], second.1[1], second.1[2]);
                let mut val = force.dot(&w_a.cross(&v_b));
                if i != j {
                    val += 0.5 * torque.dot(&w_a.cross(&second.0.omega()));
                }
                h[(i, j)] = val;
                h[(j, i)] = val;
            }
        }
    }
    HessianSet {
        h_qq: h.view((0, 0), (n, n)).into_owned(),
        h_q_theta: h.view((0, n), (n, m)).into_owned(),
        h_theta_theta: h.view((n, n), (m, m)).into_owned(),
        q: q.clone(),
        theta: theta.clone(),
        wrench: *wrench,
    }
}

/// Hessian blocks of `Fᵀ·g` at `(q, θ)`; `F` is (force N, torque N·m).
pub fn hessians(
    chain: &ChainModel,
    q: &DVector<f64>,
    theta: &DVector<f64>,
    wrench: &Vector6<f64>,
) -> Result<HessianSet> {
    if !wrench.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("non-finite wrench"));
    }
    let kin = chain.evaluate(q, theta)?;
    Ok(hessians_from(&kin, q, theta, wrench))
}

/// Maximum relative deviations between analytic and central-difference
/// derivatives, one entry per block.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FdReport {
    pub j_theta: f64,
    pub j_q: f64,
    pub h_qq: f64,
    pub h_q_theta: f64,
    pub h_theta_theta: f64,
}

impl FdReport {
    pub fn max(&self) -> f64 {
        [self.j_theta, self.j_q, self.h_qq, self.h_q_theta, self.h_theta_theta]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn max_jacobian(&self) -> f64 {
        self.j_theta.max(self.j_q)
    }

    pub fn max_hessian(&self) -> f64 {
        self.h_qq.max(self.h_q_theta).max(self.h_theta_theta)
    }
}

/// `max |a − b| / max(|a|_∞, |b|_∞, floor)`, zero when both blocks vanish.
pub fn relative_deviation(analytic: &DMatrix<f64>, reference: &DMatrix<f64>, floor: f64) -> f64 {
    if analytic.is_empty() {
        return 0.0;
    }
    let scale = analytic.amax().max(reference.amax()).max(floor);
    if scale == 0.0 {
        return 0.0;
    }
    (analytic - reference).amax() / scale
}

/// Coordinates stacked `[q, θ]`.
fn split(c: &DVector<f64>, n: usize) -> (DVector<f64>, DVector<f64>) {
    (c.rows(0, n).into_owned(), c.rows(n, c.len() - n).into_owned())
}

/// Central-difference Jacobian of `pose_diff(g(c), g(c₀))` and Hessian of
/// `Fᵀ·pose_diff(g(c), g(c₀))`. The Jacobian uses `step` scaled by the
/// coordinate magnitude, the Hessian uses `√step` (clamped to [1e-5, 1e-2]) in
/// a four-point mixed difference.
pub fn finite_difference_derivatives(
    chain: &ChainModel,
    q: &DVector<f64>,
    theta: &DVector<f64>,
    wrench: &Vector6<f64>,
    step: f64,
) -> Result<(JacobianPair, HessianSet)> {
    chain.check_dims(q, theta)?;
    let n = chain.n();
    let m = chain.m();
    let dim = n + m;
    let mut c0 = DVector::zeros(dim);
    c0.rows_mut(0, n).copy_from(q);
    c0.rows_mut(n, m).copy_from(theta);
    let pose0 = chain.evaluate(q, theta)?.pose();
    let twist = |c: &DVector<f64>| -> Result<Twist6> {
        let (qq, tt) = split(c, n);
        pose_diff(&chain.evaluate(&qq, &tt)?.pose(), &pose0)
    };

    let mut jac = DMatrix::zeros(6, dim);
    for k in 0..dim {
        let h = step * c0[k].abs().max(1.0);
        let mut plus = c0.clone();
        plus[k] += h;
        let mut minus = c0.clone();
        minus[k] -= h;
        // exactly representable step
        let span = plus[k] - minus[k];
        let col = (twist(&plus)? - twist(&minus)?) / span;
        jac.set_column(k, &DVector::from_column_slice(col.as_slice()));
    }

    let hh = step.sqrt().clamp(1e-5, 1e-2);
    let phi = |c: &DVector<f64>| -> Result<f64> { Ok(wrench.dot(&twist(c)?)) };
    let mut hess = DMatrix::zeros(dim, dim);
    if *wrench != Vector6::zeros() {
        for i in 0..dim {
            for j in i..dim {
                let mut acc = 0.0;
                for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut c = c0.clone();
                    c[i] += si * hh;
                    c[j] += sj * hh;
                    acc += sign * phi(&c)?;
                }
                let v = acc / (4.0 * hh * hh);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
    }

    let jp = JacobianPair {
        j_q: jac.columns(0, n).into_owned(),
        j_theta: jac.columns(n, m).into_owned(),
        q: q.clone(),
        theta: theta.clone(),
    };
    let hs = HessianSet {
        h_qq: hess.view((0, 0), (n, n)).into_owned(),
        h_q_theta: hess.view((0, n), (n, m)).into_owned(),
        h_theta_theta: hess.view((n, n), (m, m)).into_owned(),
        q: q.clone(),
        theta: theta.clone(),
        wrench: *wrench,
    };
    Ok((jp, hs))
}

/// Compares analytic derivatives with central differences.
pub fn fd_validate(
    chain: &ChainModel,
    q: &DVector<f64>,
    theta: &DVector<f64>,
    wrench: &Vector6<f64>,
    step: f64,
) -> Result<FdReport> {
    if !(1e-9..=1e-3).contains(&step) {
        return Err(Error::invalid(format!("finite-difference step {step} outside [1e-9, 1e-3]")));
    }
    check_len("wrench", 6, wrench.len())?;
    let kin = chain.evaluate(q, theta)?;
    let jac = jacobians_from(&kin, q, theta);
    let hes = hessians_from(&kin, q, theta, wrench);
    let (fj, fh) = finite_difference_derivatives(chain, q, theta, wrench, step)?;
    // Jacobian entries are measured against a unit screw; Hessian blocks
    // against the whole Hessian or the wrench on a 1 m lever, so blocks
    // that vanish analytically are not judged on round-off alone
    let h_scale = hes.full().amax().max(fh.full().amax()).max(wrench.amax());
    Ok(FdReport {
        j_theta: relative_deviation(&jac.j_theta, &fj.j_theta, 1.0),
        j_q: relative_deviation(&jac.j_q, &fj.j_q, 1.0),
        h_qq: relative_deviation(&hes.h_qq, &fh.h_qq, h_scale),
        h_q_theta: relative_deviation(&hes.h_q_theta, &fh.h_q_theta, h_scale),
        h_theta_theta: relative_deviation(&hes.h_theta_theta, &fh.h_theta_theta, h_scale),
    })
}
