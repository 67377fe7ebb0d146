//! Manipulator chains as ordered element sequences.
//!
//! A chain is a product of homogeneous transforms. Each element is either a
//! constant (rigid link, locked actuator), a passive joint with coordinate
//! `q[i]`, or a virtual spring with coordinates in `θ`. Six-d.o.f. springs
//! expand into the factor sequence `Tx·Ty·Tz·Rx·Ry·Rz` over six consecutive
//! `θ` entries.
//!
//! Units are SI throughout: meters, radians, newtons. Stiffness blocks are in
//! N/m, N·m/rad and N or N·m per unit of the coupled coordinate.

mod document;

pub use document::{parse_chain, ChainDocument, ComplianceUnits, ElementSpec, FactorSpec};

use nalgebra::{DMatrix, DVector, Matrix6, SymmetricEigen, Vector3};

use crate::error::{check_len, Error, Result};
use crate::se3::{pose_diff, Axis, Pose, Transform, Twist6};

/// Symmetric positive-definite stiffness block of a six-d.o.f. virtual spring.
#[derive(Debug, Clone, PartialEq)]
pub struct SpringBlock {
    stiffness: Matrix6<f64>,
    source_compliance: Option<Matrix6<f64>>,
}

impl SpringBlock {
    /// Uses `stiffness` directly after checking symmetry (1e-9 relative) and
    /// positive definiteness.
    pub fn from_stiffness(stiffness: Matrix6<f64>) -> Result<Self> {
        let scale = stiffness.amax().max(f64::MIN_POSITIVE);
        if (stiffness - stiffness.transpose()).amax() > 1e-9 * scale {
            return Err(Error::invalid("stiffness block is not symmetric"));
        }
        let min = min_eigenvalue6(&stiffness);
        if !(min > 0.0) {
            return Err(Error::invalid(format!(
                "stiffness block is not positive definite (smallest eigenvalue {min:.6e})"
            )));
        }
        Ok(SpringBlock {
            stiffness,
            source_compliance: None,
        })
    }

    /// Inverts a compliance matrix. The compliance is symmetrized as
    /// `(C + Cᵀ)/2` first; printed data is only symmetric to its precision.
    pub fn from_compliance(compliance: Matrix6<f64>) -> Result<Self> {
        let sym = (compliance + compliance.transpose()) * 0.5;
        let min = min_eigenvalue6(&sym);
        if !(min > 0.0) {
            return Err(Error::invalid(format!(
                "compliance is not positive definite (negative eigenvalue {min:.6e})"
            )));
        }
        let inv = sym
            .cholesky()
            .ok_or_else(|| Error::invalid("compliance Cholesky factorization failed"))?
            .inverse();
        Ok(SpringBlock {
            stiffness: (inv + inv.transpose()) * 0.5,
            source_compliance: Some(compliance),
        })
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("stiffness scale must be positive"));
        }
        Ok(SpringBlock {
            stiffness: self.stiffness * factor,
            source_compliance: self.source_compliance.map(|c| c / factor),
        })
    }

    pub fn stiffness(&self) -> &Matrix6<f64> {
        &self.stiffness
    }

    pub fn source_compliance(&self) -> Option<&Matrix6<f64>> {
        self.source_compliance.as_ref()
    }
}

fn min_eigenvalue6(m: &Matrix6<f64>) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

/// One element of a chain.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainElement {
    Rigid(Transform),
    Passive { axis: Axis, index: usize },
    /// Locked actuator: an elementary transform held at `value`.
    Actuated { axis: Axis, value: f64 },
    Spring1 { axis: Axis, index: usize, stiffness: f64 },
    /// Six-d.o.f. spring on `θ[start..start + 6]`.
    Spring6 { start: usize, block: SpringBlock },
}

impl ChainElement {
    pub fn kind(&self) -> &'static str {
        match self {
            ChainElement::Rigid(_) => "rigid",
            ChainElement::Passive { .. } => "passive",
            ChainElement::Actuated { .. } => "actuated",
            ChainElement::Spring1 { .. } => "spring1",
            ChainElement::Spring6 { .. } => "spring6",
        }
    }
}

/// Which vector a chain coordinate lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Q(usize),
    Theta(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Factor {
    Constant(Transform),
    Joint { axis: Axis, coord: Coord },
}

/// Immutable chain model: element list, coordinate counts and the aggregated
/// spring stiffness `K_θ`.
#[derive(Debug, Clone)]
pub struct ChainModel {
    name: String,
    elements: Vec<ChainElement>,
    n: usize,
    m: usize,
    k_theta: DMatrix<f64>,
    k_theta_inv: DMatrix<f64>,
    factors: Vec<Factor>,
}

impl ChainModel {
    /// Validates index coverage and assembles `K_θ`.
    pub fn new(name: impl Into<String>, elements: Vec<ChainElement>) -> Result<Self> {
        let label = |i: usize, e: &ChainElement| format!("element #{i} ({})", e.kind());
        let mut q_seen: Vec<bool> = Vec::new();
        let mut t_seen: Vec<bool> = Vec::new();
        let mark = |seen: &mut Vec<bool>, idx: usize| -> bool {
            if seen.len() <= idx {
                seen.resize(idx + 1, false);
            }
            !std::mem::replace(&mut seen[idx], true)
        };

        for (i, e) in elements.iter().enumerate() {
            match e {
                ChainElement::Rigid(t) => {
                    if !t.is_valid(1e-9) {
                        return Err(Error::parse(label(i, e), "rotation block is not orthonormal"));
                    }
                }
                ChainElement::Passive { index, .. } => {
                    if !mark(&mut q_seen, *index) {
                        return Err(Error::parse(label(i, e), format!("duplicate q index {index}")));
                    }
                }
                ChainElement::Actuated { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::parse(label(i, e), "non-finite actuator value"));
                    }
                }
                ChainElement::Spring1 {
                    index, stiffness, ..
                } => {
                    if !(*stiffness > 0.0 && stiffness.is_finite()) {
                        return Err(Error::parse(label(i, e), format!("stiffness {stiffness} must be positive")));
                    }
                    if !mark(&mut t_seen, *index) {
                        return Err(Error::parse(label(i, e), format!("duplicate θ index {index}")));
                    }
                }
                ChainElement::Spring6 { start, .. } => {
                    for idx in *start..*start + 6 {
                        if !mark(&mut t_seen, idx) {
                            return Err(Error::parse(label(i, e), format!("duplicate θ index {idx}")));
                        }
                    }
                }
            }
        }
        if let Some(gap) = q_seen.iter().position(|s| !s) {
            return Err(Error::parse("chain", format!("q indices are not contiguous: {gap} missing")));
        }
        if let Some(gap) = t_seen.iter().position(|s| !s) {
            return Err(Error::parse("chain", format!("θ indices are not contiguous: {gap} missing")));
        }
        let n = q_seen.len();
        let m = t_seen.len();

        let mut k_theta = DMatrix::zeros(m, m);
        let mut k_theta_inv = DMatrix::zeros(m, m);
        for e in &elements {
            match e {
                ChainElement::Spring1 {
                    index, stiffness, ..
                } => {
                    k_theta[(*index, *index)] = *stiffness;
                    k_theta_inv[(*index, *index)] = 1.0 / stiffness;
                }
                ChainElement::Spring6 { start, block } => {
                    let k = block.stiffness();
                    let kinv = k
                        .cholesky()
                        .ok_or_else(|| Error::invalid("spring block is not positive definite"))?
                        .inverse();
                    let kinv = (kinv + kinv.transpose()) * 0.5;
                    k_theta.view_mut((*start, *start), (6, 6)).copy_from(k);
                    k_theta_inv.view_mut((*start, *start), (6, 6)).copy_from(&kinv);
                }
                _ => {}
            }
        }

        let mut factors: Vec<Factor> = Vec::new();
        let push_const = |factors: &mut Vec<Factor>, t: Transform| {
            if let Some(Factor::Constant(prev)) = factors.last_mut() {
                *prev = *prev * t;
            } else {
                factors.push(Factor::Constant(t));
            }
        };
        for e in &elements {
            match e {
                ChainElement::Rigid(t) => push_const(&mut factors, *t),
                ChainElement::Actuated { axis, value } => {
                    push_const(&mut factors, Transform::elementary_unchecked(*axis, *value))
                }
                ChainElement::Passive { axis, index } => factors.push(Factor::Joint {
                    axis: *axis,
                    coord: Coord::Q(*index),
                }),
                ChainElement::Spring1 { axis, index, .. } => factors.push(Factor::Joint {
                    axis: *axis,
                    coord: Coord::Theta(*index),
                }),
                ChainElement::Spring6 { start, .. } => {
                    for (k, axis) in Axis::ALL.iter().enumerate() {
                        factors.push(Factor::Joint {
                            axis: *axis,
                            coord: Coord::Theta(start + k),
                        });
                    }
                }
            }
        }

        Ok(ChainModel {
            name: name.into(),
            elements,
            n,
            m,
            k_theta,
            k_theta_inv,
            factors,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn elements(&self) -> &[ChainElement] {
        &self.elements
    }

    /// Number of passive-joint coordinates.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of virtual-spring coordinates.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k_theta(&self) -> &DMatrix<f64> {
        &self.k_theta
    }

    pub fn k_theta_inv(&self) -> &DMatrix<f64> {
        &self.k_theta_inv
    }

    /// Eigenvalues of `K_θ`, ascending.
    pub fn k_theta_spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.k_theta.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub(crate) fn check_dims(&self, q: &DVector<f64>, theta: &DVector<f64>) -> Result<()> {
        check_len("q", self.n, q.len())?;
        check_len("θ", self.m, theta.len())
    }

    /// Product of all factors plus the world-frame screw of every coordinate.
    pub fn evaluate(&self, q: &DVector<f64>, theta: &DVector<f64>) -> Result<Kinematics> {
        self.check_dims(q, theta)?;
        if !q.iter().chain(theta.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite joint coordinate"));
        }
        let mut acc = Transform::identity();
        let mut q_screws = vec![Screw::default(); self.n];
        let mut t_screws = vec![Screw::default(); self.m];
        for (order, f) in self.factors.iter().enumerate() {
            match f {
                Factor::Constant(t) => acc = acc * *t,
                Factor::Joint { axis, coord } => {
                    let screw = Screw {
                        order,
                        axis: acc.rotation() * axis.unit(),
                        origin: acc.translation(),
                        revolute: axis.is_rotation(),
                    };
                    let value = match coord {
                        Coord::Q(i) => {
                            q_screws[*i] = screw;
                            q[*i]
                        }
                        Coord::Theta(j) => {
                            t_screws[*j] = screw;
                            theta[*j]
                        }
                    };
                    acc = acc * Transform::elementary_unchecked(*axis, value);
                }
            }
        }
        Ok(Kinematics {
            end: acc,
            q_screws,
            theta_screws: t_screws,
        })
    }
}

/// World-frame joint axis of one coordinate at a given configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Screw {
    /// Position of the factor in the expanded chain product.
    pub order: usize,
    /// Unit axis direction in the base frame.
    pub axis: Vector3<f64>,
    /// Origin of the joint frame in the base frame.
    pub origin: Vector3<f64>,
    pub revolute: bool,
}

impl Screw {
    /// Angular rate contributed per unit coordinate.
    pub fn omega(&self) -> Vector3<f64> {
        if self.revolute {
            self.axis
        } else {
            Vector3::zeros()
        }
    }

    /// Jacobian column: end-point velocity and angular velocity per unit
    /// coordinate.
    pub fn column(&self, end_point: &Vector3<f64>) -> Twist6 {
        if self.revolute {
            let v = self.axis.cross(&(end_point - self.origin));
            Twist6::new(v.x, v.y, v.z, self.axis.x, self.axis.y, self.axis.z)
        } else {
            Twist6::new(self.axis.x, self.axis.y, self.axis.z, 0.0, 0.0, 0.0)
        }
    }
}

/// Result of [`ChainModel::evaluate`].
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub end: Transform,
    pub q_screws: Vec<Screw>,
    pub theta_screws: Vec<Screw>,
}

impl Kinematics {
    pub fn pose(&self) -> Pose {
        self.end.pose()
    }
}

/// End-effector pose `g(q, θ)`.
pub fn forward_kinematics(chain: &ChainModel, q: &DVector<f64>, theta: &DVector<f64>) -> Result<Pose> {
    Ok(chain.evaluate(q, theta)?.pose())
}

/// Virtual joint reactions `τ_θ = K_θ·θ`.
pub fn spring_torques(chain: &ChainModel, theta: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("θ", chain.m(), theta.len())?;
    Ok(chain.k_theta() * theta)
}

const IK_MAX_ITER: usize = 200;
const IK_DAMPING: f64 = 1e-6;
const IK_STEP_ROT: f64 = 0.2;
const IK_STEP_LIN: f64 = 0.05;
const IK_TOL: f64 = 1e-9;

/// Rigid (θ = 0) inverse kinematics by damped least squares.
///
/// Converges when the pose error projected onto the span of the passive-joint
/// Jacobian drops below 1e-9; error components the passive joints cannot
/// produce are ignored.
pub fn inverse_kinematics_unloaded(
    chain: &ChainModel,
    target: &Pose,
    q_guess: &DVector<f64>,
) -> Result<DVector<f64>> {
    if chain.n() == 0 {
        return Err(Error::invalid("inverse kinematics needs at least one passive joint"));
    }
    check_len("q", chain.n(), q_guess.len())?;
    let theta = DVector::zeros(chain.m());
    let mut q = q_guess.clone();
    let mut last_err = f64::INFINITY;
    for _ in 0..IK_MAX_ITER {
        let kin = chain.evaluate(&q, &theta)?;
        let err = pose_diff(target, &kin.pose())?;
        let p = kin.end.translation();
        let jq = DMatrix::from_fn(6, chain.n(), |r, c| kin.q_screws[c].column(&p)[r]);
        let e = DVector::from_column_slice(err.as_slice());

        // least-squares projection of the error onto the controllable span
        let jtj = jq.transpose() * &jq;
        let mut reg = jtj.clone();
        for i in 0..chain.n() {
            reg[(i, i)] += IK_DAMPING;
        }
        let rhs = jq.transpose() * &e;
        let mut dq = reg
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| reg.lu().solve(&rhs))
            .ok_or(Error::Unreachable {
                iterations: 0,
                error: err.norm(),
            })?;
        let projected = (&jq * &dq).norm();
        last_err = projected;
        if projected < IK_TOL {
            return Ok(q);
        }
        let mut ratio: f64 = 1.0;
        for (i, s) in kin.q_screws.iter().enumerate() {
            let cap = if s.revolute { IK_STEP_ROT } else { IK_STEP_LIN };
            ratio = ratio.max(dq[i].abs() / cap);
        }
        dq /= ratio;
        q += dq;
    }
    Err(Error::Unreachable {
        iterations: IK_MAX_ITER,
        error: last_err,
    })
}

/// Convenience builder that assigns `q`/`θ` indices in element order.
#[derive(Debug, Default)]
pub struct ChainBuilder {
    name: String,
    elements: Vec<ChainElement>,
    next_q: usize,
    next_theta: usize,
}

impl ChainBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        ChainBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn rigid(mut self, t: Transform) -> Self {
        self.elements.push(ChainElement::Rigid(t));
        self
    }

    /// Rigid elementary transform; panics on a non-finite value.
    pub fn link(self, axis: Axis, value: f64) -> Self {
        let t = Transform::elementary(axis, value).expect("finite link parameter");
        self.rigid(t)
    }

    pub fn passive(mut self, axis: Axis) -> Self {
        self.elements.push(ChainElement::Passive {
            axis,
            index: self.next_q,
        });
        self.next_q += 1;
        self
    }

    pub fn actuated(mut self, axis: Axis, value: f64) -> Self {
        self.elements.push(ChainElement::Actuated { axis, value });
        self
    }

    pub fn spring1(mut self, axis: Axis, stiffness: f64) -> Self {
        self.elements.push(ChainElement::Spring1 {
            axis,
            index: self.next_theta,
            stiffness,
        });
        self.next_theta += 1;
        self
    }

    pub fn spring6(mut self, block: SpringBlock) -> Self {
        self.elements.push(ChainElement::Spring6 {
            start: self.next_theta,
            block,
        });
        self.next_theta += 6;
        self
    }

    pub fn build(self) -> Result<ChainModel> {
        ChainModel::new(self.name, self.elements)
    }
}
