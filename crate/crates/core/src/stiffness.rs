//! Cartesian stiffness at a loaded equilibrium.
//!
//! With `k^F = (K_θ − H_θθ)⁻¹` the tangent stiffness is the upper-left 6×6
//! block of the inverse of
//!
//! ```text
//! [ J_θ·k^F·J_θᵀ            J_q + J_θ·k^F·H_θq        ]
//! [ J_qᵀ + H_qθ·k^F·J_θᵀ    H_qq + H_qθ·k^F·H_θq      ]
//! ```
//!
//! This is evaluated in the equivalent null-space form. With
//! `C = [J_q J_θ]`, `W = diag(0, K_θ) − H` over `[q, θ]` and `Z` spanning the
//! kernel of `C`,
//!
//! ```text
//! K^F = C⁺ᵀ·(W − W·Z·(ZᵀWZ)⁻¹·ZᵀW)·C⁺
//! ```
//!
//! `ZᵀWZ` is the constrained energy Hessian, so the evaluation only degrades
//! at a genuine stability limit and not where `K_θ − H_θθ` alone is
//! singular. At zero load the Hessians vanish and this reduces to the
//! unloaded form.
//!
//! Directions the chain has no compliance in are reported with zero
//! stiffness (minimum-norm inverse) and a reduced `block_rank`.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use crate::chain::ChainModel;
use crate::diff::{hessians_from, jacobians_from};
use crate::equilibrium::EquilibriumState;
use crate::error::{Error, Result};
use crate::linalg;
use crate::se3::{pose_diff, Twist6};

/// Pose disagreement tolerated when summing chains.
pub const FRAME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StiffnessMode {
    Loaded,
    Unloaded,
}

#[derive(Debug, Clone)]
pub struct StiffnessResult {
    /// Symmetrized 6×6 stiffness (N/m, N/rad, N·m/m, N·m/rad).
    pub k: Matrix6<f64>,
    pub mode: StiffnessMode,
    pub state: EquilibriumState,
    /// Ascending eigenvalues of `k`.
    pub spectrum: [f64; 6],
    /// `‖K − Kᵀ‖/‖K‖` before symmetrization.
    pub asymmetry: f64,
    /// Eigenvalue spread of the constrained energy Hessian.
    pub condition_of_block: f64,
    /// Number of Cartesian directions the chain deflects in.
    pub block_rank: usize,
    /// Smallest eigenvalue of `K_θ − H_θθ`.
    pub spring_block_min_eig: f64,
    /// `K_θ − H_θθ` is singular or indefinite.
    pub spring_block_critical: bool,
    /// See [`EquilibriumState::stability_eigenvalue`].
    pub stability_eigenvalue: Option<f64>,
}

impl StiffnessResult {
    /// `dᵀ·K·d`.
    pub fn directional(&self, d: &Twist6) -> f64 {
        d.dot(&(self.k * d))
    }

    /// Indefinite constrained energy Hessian at this state.
    pub fn unstable(&self) -> bool {
        self.stability_eigenvalue.is_some_and(|l| l < 0.0)
    }

    /// Unstable, or the spring block is singular in a chain without
    /// internal motions to test.
    pub fn critical(&self) -> bool {
        self.unstable() || (self.spring_block_critical && self.stability_eigenvalue.is_none())
    }
}

fn spectrum(k: &Matrix6<f64>) -> [f64; 6] {
    let mut e: Vec<f64> = k.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    [e[0], e[1], e[2], e[3], e[4], e[5]]
}

/// Tangent stiffness at a converged loaded state.
pub fn stiffness_loaded(chain: &ChainModel, state: &EquilibriumState) -> Result<StiffnessResult> {
    let n = chain.n();
    let m = chain.m();
    if !state.f.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("state wrench is not finite"));
    }
    let kin = chain.evaluate(&state.q, &state.theta)?;
    let jac = jacobians_from(&kin, &state.q, &state.theta);
    let loaded = state.f != Vector6::zeros();
    let hes = hessians_from(&kin, &state.q, &state.theta, &state.f);

    let j_q_rank = if n == 0 { 0 } else { jac.j_q.clone().svd(false, false).rank(1e-10 * jac.j_q.amax().max(1.0)) };
    if j_q_rank < n {
        return Err(Error::SingularConfiguration(format!(
            "passive joints are dependent (rank {j_q_rank} of {n})"
        )));
    }

    let spring_block = chain.k_theta() - &hes.h_theta_theta;
    let eigs = linalg::sym_eigenvalues(&spring_block);
    let min_eig = eigs.first().copied().unwrap_or(f64::INFINITY);
    let max_eig = eigs.last().copied().unwrap_or(0.0).abs();
    let spring_block_critical = min_eig <= 1e-12 * max_eig;

    // null-space form: with C = [J_q J_θ], W = diag(0, K_θ) − H and
    // Z spanning ker C, K^F = C⁺ᵀ·(W − W·Z·(ZᵀWZ)⁻¹·ZᵀW)·C⁺
    let size = n + m;
    let mut c = DMatrix::zeros(6, size);
    c.view_mut((0, 0), (6, n)).copy_from(&jac.j_q);
    c.view_mut((0, n), (6, m)).copy_from(&jac.j_theta);
    let mut w = -hes.full();
    w.view_mut((n, n), (m, m)).copy_from(&spring_block);
    let c_svd = c.clone().svd(true, true);
    let c_tol = 1e-10 * c_svd.singular_values.max().max(f64::MIN_POSITIVE);
    let block_rank = c_svd.singular_values.iter().filter(|v| **v > c_tol).count();
    let c_pinv = c_svd
        .pseudo_inverse(c_tol)
        .map_err(|e| Error::SingularConfiguration(format!("pseudo-inverse failed: {e}")))?;
    let z = linalg::null_space(&c);
    let (projected, reduced_eigs) = if z.ncols() == 0 {
        (w, Vec::new())
    } else {
        let wz = &w * &z;
        let reduced = z.transpose() * &wz;
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let eigs = linalg::sym_eigenvalues(&reduced);
        let correction = match reduced.clone().full_piv_lu().solve(&wz.transpose()) {
            Some(x) if x.iter().all(|v| v.is_finite()) => x,
            _ => {
                let fac = linalg::factor(&reduced)
                    .ok_or_else(|| Error::SingularConfiguration("non-finite reduced Hessian".into()))?;
                fac.inverse() * wz.transpose()
            }
        };
        (&w - &wz * correction, eigs)
    };
    let raw: Matrix6<f64> = Matrix6::from_iterator((c_pinv.transpose() * projected * &c_pinv).iter().copied());
    let norm = raw.norm();
    let asymmetry = if norm == 0.0 { 0.0 } else { (raw - raw.transpose()).norm() / norm };
    let k = (raw + raw.transpose()) * 0.5;
    let condition_of_block = match (reduced_eigs.first(), reduced_eigs.last()) {
        (Some(lo), Some(hi)) if *lo != 0.0 => (hi / lo).abs(),
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    };
    let stability = reduced_eigs.first().copied();
    Ok(StiffnessResult {
        k,
        mode: if loaded { StiffnessMode::Loaded } else { StiffnessMode::Unloaded },
        state: state.clone(),
        spectrum: spectrum(&k),
        asymmetry,
        condition_of_block,
        block_rank,
        spring_block_min_eig: min_eig,
        spring_block_critical,
        stability_eigenvalue: stability,
    })
}

/// Stiffness at `(q0, θ = 0)` with no load.
pub fn stiffness_unloaded(chain: &ChainModel, q0: &DVector<f64>) -> Result<StiffnessResult> {
    let state = EquilibriumState::unloaded(chain, q0)?;
    stiffness_loaded(chain, &state)
}

/// Sum of chain stiffnesses sharing one end-effector frame.
pub fn aggregate_parallel(results: &[StiffnessResult]) -> Result<StiffnessResult> {
    let (first, rest) = results
        .split_first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty list of stiffness results"))?;
    let mut out = first.clone();
    for r in rest {
        let d = pose_diff(&r.state.pose, &first.state.pose)?;
        let gap = d.norm();
        if !(gap < FRAME_TOL) {
            return Err(Error::FrameMismatch(gap));
        }
        out.k += r.k;
        if r.mode == StiffnessMode::Loaded {
            out.mode = StiffnessMode::Loaded;
        }
        out.asymmetry = out.asymmetry.max(r.asymmetry);
        out.condition_of_block = out.condition_of_block.max(r.condition_of_block);
        out.block_rank = out.block_rank.min(r.block_rank);
        out.spring_block_min_eig = out.spring_block_min_eig.min(r.spring_block_min_eig);
        out.spring_block_critical |= r.spring_block_critical;
        out.stability_eigenvalue = match (out.stability_eigenvalue, r.stability_eigenvalue) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
    out.spectrum = spectrum(&out.k);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainBuilder;
    use crate::equilibrium::{solve_equilibrium, SolverSettings};
    use crate::se3::Axis;

    #[test]
    fn series_springs_unloaded() {
        let c = ChainBuilder::new("ss").spring1(Axis::Tx, 1000.0).spring1(Axis::Tx, 2000.0).build().unwrap();
        let r = stiffness_unloaded(&c, &DVector::zeros(0)).unwrap();
        assert!((r.k[(0, 0)] - 2000.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.mode, StiffnessMode::Unloaded);
        assert_eq!(r.block_rank, 1);
    }

    #[test]
    fn prismatic_spring_ignores_load() {
        let c = ChainBuilder::new("s").spring1(Axis::Tx, 1000.0).build().unwrap();
        let q = DVector::zeros(0);
        let t = c.evaluate(&q, &DVector::zeros(1)).unwrap().pose().offset(&Twist6::new(-0.003, 0.0, 0.0, 0.0, 0.0, 0.0));
        let s = solve_equilibrium(&c, &t, (&q, &DVector::zeros(1)), &SolverSettings::default()).unwrap();
        let r = stiffness_loaded(&c, &s).unwrap();
        assert_eq!(r.mode, StiffnessMode::Loaded);
        assert!((r.k[(0, 0)] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn collinear_passive_joint_gives_zero_mode() {
        let block = crate::chain::SpringBlock::from_stiffness(Matrix6::from_diagonal(&Vector6::new(
            1e3, 2e3, 3e3, 10.0, 20.0, 30.0,
        )))
        .unwrap();
        let c = ChainBuilder::new("c").spring6(block).passive(Axis::Tx).build().unwrap();
        let r = stiffness_unloaded(&c, &DVector::zeros(1)).unwrap();
        assert!(r.spectrum[0].abs() < 1e-9, "{:?}", r.spectrum);
        assert!(r.k[(0, 0)].abs() < 1e-9);
        assert!((r.k[(1, 1)] - 2e3).abs() < 1e-6);
    }

    #[test]
    fn dependent_passive_joints_are_singular() {
        let c = ChainBuilder::new("c").spring1(Axis::Tx, 1.0).passive(Axis::Ty).passive(Axis::Ty).build().unwrap();
        let r = stiffness_unloaded(&c, &DVector::zeros(2));
        assert!(matches!(r, Err(Error::SingularConfiguration(_))));
    }

    #[test]
    fn aggregate_doubles_and_checks_frames() {
        let c = ChainBuilder::new("s").spring1(Axis::Tx, 1000.0).build().unwrap();
        let r = stiffness_unloaded(&c, &DVector::zeros(0)).unwrap();
        let two = aggregate_parallel(&[r.clone(), r.clone()]).unwrap();
        assert_eq!(two.k, r.k * 2.0);
        let one = aggregate_parallel(std::slice::from_ref(&r)).unwrap();
        assert_eq!(one.k, r.k);
        assert!(aggregate_parallel(&[]).is_err());

        let d = ChainBuilder::new("d").link(Axis::Tx, 0.1).spring1(Axis::Tx, 1000.0).build().unwrap();
        let r2 = stiffness_unloaded(&d, &DVector::zeros(0)).unwrap();
        assert!(matches!(aggregate_parallel(&[r, r2]), Err(Error::FrameMismatch(_))));
    }
}
