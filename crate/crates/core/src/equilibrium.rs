//! Loaded static equilibrium for a prescribed end-effector pose.
//!
//! Each iterate linearizes the chain at `(qᵢ, θᵢ)` and solves the saddle-point
//! system
//!
//! ```text
//! [ J_θ·K_θ⁻¹·J_θᵀ  J_q ] [ F  ]   [ pose_diff(t, g(qᵢ, θᵢ)) + J_θ·θᵢ ]
//! [ J_qᵀ            0   ] [ Δq ] = [ 0                               ]
//! ```
//!
//! then sets `qᵢ₊₁ = qᵢ + Δq` and `θᵢ₊₁ = K_θ⁻¹·J_θᵀ·F`. Fixed points satisfy
//! `J_θᵀF = K_θθ`, `J_qᵀF = 0` and `g(q, θ) = t` exactly.
//!
//! The system is solved through an equilibrated SVD. Rank-deficient but
//! consistent systems (chains with fewer than six compliant directions) get
//! the minimum-norm wrench; inconsistent ones are kinematic singularities.
//!
//! Residuals that rise twice in a row halve a relaxation factor applied to
//! the whole update. Once the contraction turns linear (ratio above 0.1 or no
//! longer shrinking) the iteration finishes with backtracked Newton steps on
//! the coupled equations, which keeps the iteration count low near stability
//! limits where the fixed-point map contracts slowly.
//!
//! A solve that stalls restarts from a perturbed start. With
//! `require_stable`, a converged state whose constrained Hessian has a
//! negative eigenvalue is rejected, and later restarts are pushed along that
//! eigenvector with growing amplitude and alternating sign so that they land
//! on a stable branch.

use nalgebra::{DMatrix, DVector, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{ChainModel, Kinematics};
use crate::diff::{hessians_from, jacobians_from, JacobianPair};
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::se3::{pose_diff, Pose, Twist6};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Pose residual bound (m, with rotations scaled by `characteristic_length`).
    pub tol_pose: f64,
    /// Relative static residual bound.
    pub tol_static: f64,
    pub max_iter: usize,
    /// Half-width of the uniform restart perturbation.
    pub restart_noise: f64,
    pub max_restarts: usize,
    pub rng_seed: u64,
    /// Metres per radian when combining position and orientation errors.
    pub characteristic_length: f64,
    /// Reject converged states whose constrained energy Hessian is indefinite
    /// and restart from a perturbed copy.
    pub require_stable: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_pose: 1e-9,
            tol_static: 1e-8,
            max_iter: 100,
            restart_noise: 1e-4,
            max_restarts: 10,
            rng_seed: 0,
            characteristic_length: 1.0,
            require_stable: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_pose", self.tol_pose),
            ("tol_static", self.tol_static),
            ("characteristic_length", self.characteristic_length),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.restart_noise >= 0.0 && self.restart_noise.is_finite()) {
            return Err(Error::invalid("restart_noise must be non-negative"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumState {
    pub q: DVector<f64>,
    pub theta: DVector<f64>,
    /// Wrench (N, N·m) balancing the spring reactions.
    pub f: Vector6<f64>,
    /// Pose attained by the chain.
    pub pose: Pose,
    /// Prescribed pose.
    pub target: Pose,
    pub iterations: usize,
    pub residual_pose: f64,
    pub residual_static: f64,
    pub restarts: usize,
    /// Smallest eigenvalue of the energy Hessian restricted to motions that
    /// keep the end-effector fixed; `None` when not evaluated.
    pub stability_eigenvalue: Option<f64>,
    /// Stability eigenvalue of the first converged but unstable state that
    /// was rejected during this solve.
    pub rejected_unstable: Option<f64>,
}

impl EquilibriumState {
    /// Unloaded state `(q, 0)` whose target is its own pose.
    pub fn unloaded(chain: &ChainModel, q: &DVector<f64>) -> Result<Self> {
        let theta = DVector::zeros(chain.m());
        let pose = chain.evaluate(q, &theta)?.pose();
        Ok(Self {
            q: q.clone(),
            theta,
            f: Vector6::zeros(),
            pose,
            target: pose,
            iterations: 0,
            residual_pose: 0.0,
            residual_static: 0.0,
            restarts: 0,
            stability_eigenvalue: None,
            rejected_unstable: None,
        })
    }

    /// Stored elastic energy `½ θᵀ K_θ θ`.
    pub fn energy(&self, chain: &ChainModel) -> f64 {
        0.5 * self.theta.dot(&(chain.k_theta() * &self.theta))
    }

    pub fn is_converged(&self, settings: &SolverSettings) -> bool {
        self.residual_pose < settings.tol_pose && self.residual_static < settings.tol_static
    }
}

fn weighted_norm(d: &Twist6, length: f64) -> f64 {
    let p = d.fixed_rows::<3>(0).norm_squared();
    let r = d.fixed_rows::<3>(3).norm_squared() * length * length;
    (p + r).sqrt()
}

fn static_residual(chain: &ChainModel, jac: &JacobianPair, theta: &DVector<f64>, f: &Vector6<f64>) -> f64 {
    let fd = DVector::from_column_slice(f.as_slice());
    let k_theta = chain.k_theta() * theta;
    let r1 = (jac.j_theta.transpose() * &fd - &k_theta).norm() / (1.0 + k_theta.norm());
    let r2 = if jac.j_q.ncols() == 0 {
        0.0
    } else {
        (jac.j_q.transpose() * &fd).norm() / (1.0 + f.norm())
    };
    r1.max(r2)
}

/// `(residual_pose, residual_static)` of `state` against its own target.
pub fn residuals(chain: &ChainModel, state: &EquilibriumState, settings: &SolverSettings) -> Result<(f64, f64)> {
    let kin = chain.evaluate(&state.q, &state.theta)?;
    let d = pose_diff(&state.target, &kin.pose())?;
    let jac = jacobians_from(&kin, &state.q, &state.theta);
    Ok((
        weighted_norm(&d, settings.characteristic_length),
        static_residual(chain, &jac, &state.theta, &state.f),
    ))
}

/// Adds i.i.d. uniform noise in `[−noise, noise]` to every coordinate.
pub fn perturb_restart(
    q: &DVector<f64>,
    theta: &DVector<f64>,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> (DVector<f64>, DVector<f64>) {
    if noise <= 0.0 {
        return (q.clone(), theta.clone());
    }
    let mut jitter = |v: &DVector<f64>| v.map(|x| x + rng.random_range(-noise..=noise));
    let q2 = jitter(q);
    let t2 = jitter(theta);
    (q2, t2)
}

/// Seeded generator used for restarts.
pub fn restart_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smallest eigenvalue of `blockdiag(0, K_θ) − H(F)` on the null space of
/// `[J_q J_θ]`, or `None` when no internal motion exists.
pub fn stability_eigenvalue(chain: &ChainModel, q: &DVector<f64>, theta: &DVector<f64>, f: &Vector6<f64>) -> Result<Option<f64>> {
    let kin = chain.evaluate(q, theta)?;
    Ok(stability_from(chain, &kin, q, theta, f))
}

pub(crate) fn stability_from(
    chain: &ChainModel,
    kin: &Kinematics,
    q: &DVector<f64>,
    theta: &DVector<f64>,
    f: &Vector6<f64>,
) -> Option<f64> {
    stability_mode(chain, kin, q, theta, f).map(|(l, _)| l)
}

/// Smallest constrained eigenvalue with its mode in `[q, θ]` coordinates,
/// scaled to unit max-norm.
pub(crate) fn stability_mode(
    chain: &ChainModel,
    kin: &Kinematics,
    q: &DVector<f64>,
    theta: &DVector<f64>,
    f: &Vector6<f64>,
) -> Option<(f64, DVector<f64>)> {
    let n = chain.n();
    let m = chain.m();
    let jac = jacobians_from(kin, q, theta);
    let mut c = DMatrix::zeros(6, n + m);
    c.columns_mut(0, n).copy_from(&jac.j_q);
    c.columns_mut(n, m).copy_from(&jac.j_theta);
    let z = linalg::null_space(&c);
    if z.ncols() == 0 {
        return None;
    }
    let h = hessians_from(kin, q, theta, f).full();
    let mut w = -h;
    let mut kb = w.view_mut((n, n), (m, m));
    kb += chain.k_theta();
    let reduced = z.transpose() * w * &z;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = reduced.symmetric_eigen();
    let (i, lambda) = eig.eigenvalues.argmin();
    let mode = &z * eig.eigenvectors.column(i);
    let scale = mode.amax();
    Some((lambda, if scale > 0.0 { mode / scale } else { mode }))
}

/// Relative tolerance on the stability eigenvalue.
fn is_stable(chain: &ChainModel, lambda: Option<f64>) -> bool {
    match lambda {
        None => true,
        Some(l) => {
            let scale = chain.k_theta_spectrum().first().copied().unwrap_or(1.0);
            l >= -1e-9 * scale
        }
    }
}

/// Smallest relaxation factor applied to diverging iterations.
const MIN_RELAXATION: f64 = 1.0 / 64.0;

/// Newton correction `(Δq, Δθ, ΔF)` of the full equilibrium system
///
/// ```text
/// [ H_qq   H_qθ         J_qᵀ ] [ Δq ]   [ −J_qᵀF          ]
/// [ H_θq   H_θθ − K_θ   J_θᵀ ] [ Δθ ] = [ K_θθ − J_θᵀF    ]
/// [ J_q    J_θ          0    ] [ ΔF ]   [ pose_diff(t, g) ]
/// ```
fn newton_step(
    chain: &ChainModel,
    target: &Pose,
    it: &Iterate,
    f: &Vector6<f64>,
) -> Option<(DVector<f64>, DVector<f64>, Vector6<f64>)> {
    let (n, m) = (chain.n(), chain.m());
    let jac = jacobians_from(&it.kin, &it.q, &it.theta);
    let hes = hessians_from(&it.kin, &it.q, &it.theta, f);
    let diff = pose_diff(target, &it.kin.pose()).ok()?;
    let size = n + m + 6;
    let mut a = DMatrix::zeros(size, size);
    a.view_mut((0, 0), (n, n)).copy_from(&hes.h_qq);
    a.view_mut((0, n), (n, m)).copy_from(&hes.h_q_theta);
    a.view_mut((0, n + m), (n, 6)).copy_from(&jac.j_q.transpose());
    a.view_mut((n, 0), (m, n)).copy_from(&hes.h_q_theta.transpose());
    a.view_mut((n, n), (m, m)).copy_from(&(&hes.h_theta_theta - chain.k_theta()));
    a.view_mut((n, n + m), (m, 6)).copy_from(&jac.j_theta.transpose());
    a.view_mut((n + m, 0), (6, n)).copy_from(&jac.j_q);
    a.view_mut((n + m, n), (6, m)).copy_from(&jac.j_theta);
    let fd = DVector::from_column_slice(f.as_slice());
    let mut b = DVector::zeros(size);
    b.rows_mut(0, n).copy_from(&(-(jac.j_q.transpose() * &fd)));
    b.rows_mut(n, m).copy_from(&(chain.k_theta() * &it.theta - jac.j_theta.transpose() * &fd));
    b.rows_mut(n + m, 6).copy_from(&DVector::from_column_slice(diff.as_slice()));
    let (x, consistent) = linalg::factor(&a)?.solve(&b);
    if !consistent || !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((
        x.rows(0, n).into_owned(),
        x.rows(n, m).into_owned(),
        Vector6::from_column_slice(&x.as_slice()[n + m..]),
    ))
}

/// Contraction ratio above which the fixed-point scheme hands over to
/// Newton steps.
const SLOW_CONTRACTION: f64 = 0.1;

enum Attempt {
    Converged(EquilibriumState),
    Failed { best: EquilibriumState, singular: Option<(usize, f64)> },
}

struct Iterate {
    q: DVector<f64>,
    theta: DVector<f64>,
    kin: Kinematics,
}

fn run_attempt(
    chain: &ChainModel,
    target: &Pose,
    q0: DVector<f64>,
    theta0: DVector<f64>,
    settings: &SolverSettings,
    restarts: usize,
) -> Result<Attempt> {
    let n = chain.n();
    let kin = chain.evaluate(&q0, &theta0)?;
    let mut it = Iterate { q: q0, theta: theta0, kin };
    let mut history: Vec<f64> = Vec::new();
    let snapshot = |it: &Iterate, f: Vector6<f64>, iterations: usize, rp: f64, rs: f64| EquilibriumState {
        q: it.q.clone(),
        theta: it.theta.clone(),
        f,
        pose: it.kin.pose(),
        target: *target,
        iterations,
        residual_pose: rp,
        residual_static: rs,
        restarts,
        stability_eigenvalue: None,
        rejected_unstable: None,
    };
    let measure = |rp: f64, rs: f64| (rp / settings.tol_pose).max(rs / settings.tol_static);
    let mut best: Option<EquilibriumState> = None;
    let keep_best = |s: EquilibriumState, best: &mut Option<EquilibriumState>| {
        let better = best.as_ref().is_none_or(|b| {
            measure(s.residual_pose, s.residual_static) < measure(b.residual_pose, b.residual_static)
                || !b.residual_pose.is_finite()
        });
        if better {
            *best = Some(s);
        }
    };
    let mut omega = 1.0;
    let mut rises = 0;
    let mut previous: Option<(Vector6<f64>, f64)> = None;

    let mut newton = false;
    let mut last_ratio = f64::INFINITY;

    for iteration in 1..=settings.max_iter {
        // near a stability limit the fixed-point contraction tends to one;
        // finish with damped Newton steps
        if let (true, Some((f_cur, r_cur))) = (newton, previous) {
            let Some((dq, dt, df)) = newton_step(chain, target, &it, &f_cur) else {
                break;
            };
            let mut accepted = None;
            for scale in [1.0, 0.5, 0.25, 0.125] {
                let q = &it.q + &dq * scale;
                let theta = &it.theta + &dt * scale;
                let f = f_cur + df * scale;
                let kin = chain.evaluate(&q, &theta)?;
                let Ok(d) = pose_diff(target, &kin.pose()) else {
                    continue;
                };
                let rp = weighted_norm(&d, settings.characteristic_length);
                let rs = static_residual(chain, &jacobians_from(&kin, &q, &theta), &theta, &f);
                if measure(rp, rs) < r_cur {
                    accepted = Some((Iterate { q, theta, kin }, f, rp, rs));
                    break;
                }
            }
            let Some((next, f, rp, rs)) = accepted else {
                log::debug!("newton step rejected at iterate {iteration}");
                break;
            };
            it = next;
            log::trace!("iterate {iteration} (newton): pose {rp:.3e} static {rs:.3e}");
            let state = snapshot(&it, f, iteration, rp, rs);
            if rp < settings.tol_pose && rs < settings.tol_static {
                return Ok(Attempt::Converged(state));
            }
            keep_best(state, &mut best);
            previous = Some((f, measure(rp, rs)));
            continue;
        }
        let jac = jacobians_from(&it.kin, &it.q, &it.theta);
        let diff = match pose_diff(target, &it.kin.pose()) {
            Ok(d) => d,
            Err(_) => break,
        };
        let compl = &jac.j_theta * chain.k_theta_inv() * jac.j_theta.transpose();
        let mut a = DMatrix::zeros(6 + n, 6 + n);
        a.view_mut((0, 0), (6, 6)).copy_from(&compl);
        a.view_mut((0, 6), (6, n)).copy_from(&jac.j_q);
        a.view_mut((6, 0), (n, 6)).copy_from(&jac.j_q.transpose());
        let mut b = DVector::zeros(6 + n);
        let lin = DVector::from_column_slice(diff.as_slice()) + &jac.j_theta * &it.theta;
        b.rows_mut(0, 6).copy_from(&lin);

        let Some(fac) = linalg::factor(&a) else {
            break;
        };
        let (x, consistent) = fac.solve(&b);
        if !consistent {
            log::debug!("inconsistent saddle system at iterate {iteration}, condition {:.3e}", fac.condition);
            return Ok(Attempt::Failed {
                best: best.unwrap_or_else(|| snapshot(&it, Vector6::zeros(), iteration, f64::INFINITY, f64::INFINITY)),
                singular: Some((iteration, fac.condition)),
            });
        }
        let mut f = Vector6::from_column_slice(&x.as_slice()[..6]);
        let mut q = &it.q + x.rows(6, n);
        let mut theta = chain.k_theta_inv() * jac.j_theta.transpose() * DVector::from_column_slice(f.as_slice());
        if let (true, Some((f_prev, _))) = (omega < 1.0, previous) {
            f = f_prev + (f - f_prev) * omega;
            q = &it.q + (q - &it.q) * omega;
            theta = &it.theta + (theta - &it.theta) * omega;
        }
        if !q.iter().chain(theta.iter()).all(|v| v.is_finite()) {
            break;
        }
        let kin = chain.evaluate(&q, &theta)?;
        it = Iterate { q, theta, kin };

        let rp = match pose_diff(target, &it.kin.pose()) {
            Ok(d) => weighted_norm(&d, settings.characteristic_length),
            Err(_) => break,
        };
        let jac_new = jacobians_from(&it.kin, &it.q, &it.theta);
        let rs = static_residual(chain, &jac_new, &it.theta, &f);
        log::trace!("iterate {iteration}: pose {rp:.3e} static {rs:.3e}");
        let state = snapshot(&it, f, iteration, rp, rs);
        if rp < settings.tol_pose && rs < settings.tol_static {
            return Ok(Attempt::Converged(state));
        }
        keep_best(state, &mut best);

        // geometric stiffness above the elastic one makes the plain update
        // overshoot; damp the wrench and passive-joint steps
        let r = measure(rp, rs);
        // a contraction ratio that stops shrinking marks the linear regime
        if let Some((_, r_prev)) = previous {
            let ratio = r / r_prev;
            if iteration >= 3 && (ratio > SLOW_CONTRACTION || ratio >= last_ratio) {
                newton = true;
            }
            last_ratio = ratio;
        }
        rises = match previous {
            Some((_, r_prev)) if r > r_prev => rises + 1,
            _ => 0,
        };
        if rises >= 2 && omega > MIN_RELAXATION {
            omega = (omega * 0.5).max(MIN_RELAXATION);
            rises = 0;
            log::debug!("iterate {iteration}: residual rising, relaxation {omega}");
        }
        previous = Some((f, r));

        history.push(r);
        if history.len() > 10 {
            let earlier = history[history.len() - 11];
            if r > 0.99 * earlier {
                log::debug!("stalled at iterate {iteration} (pose {rp:.3e}, static {rs:.3e})");
                break;
            }
        }
    }
    Ok(Attempt::Failed {
        best: best.unwrap_or_else(|| snapshot(&it, Vector6::zeros(), 0, f64::INFINITY, f64::INFINITY)),
        singular: None,
    })
}

/// Solves for the loaded equilibrium reaching `target` from `start`.
///
/// Failed or stalled attempts restart from the start perturbed by seeded
/// uniform noise. With `require_stable`, a converged but unstable state is
/// perturbed and re-solved; if no stable state is found the last converged
/// one is returned with its negative `stability_eigenvalue`.
pub fn solve_equilibrium(
    chain: &ChainModel,
    target: &Pose,
    start: (&DVector<f64>, &DVector<f64>),
    settings: &SolverSettings,
) -> Result<EquilibriumState> {
    settings.validate()?;
    let (q_start, theta_start) = start;
    check_len("q", chain.n(), q_start.len())?;
    check_len("theta", chain.m(), theta_start.len())?;
    let mut rng = restart_rng(settings.rng_seed);
    let mut best: Option<EquilibriumState> = None;
    let mut unstable: Option<EquilibriumState> = None;
    let mut rejected: Option<f64> = None;
    let mut branch: Option<(DVector<f64>, DVector<f64>, DVector<f64>)> = None;
    let mut pushes = 0;
    let mut singular: Option<(usize, f64)> = None;
    let mut all_singular = true;
    let mut q0 = q_start.clone();
    let mut theta0 = theta_start.clone();

    for restart in 0..=settings.max_restarts {
        match run_attempt(chain, target, q0.clone(), theta0.clone(), settings, restart)? {
            Attempt::Converged(mut state) => {
                all_singular = false;
                if !settings.require_stable {
                    return Ok(state);
                }
                let kin = chain.evaluate(&state.q, &state.theta)?;
                let mode = stability_mode(chain, &kin, &state.q, &state.theta, &state.f);
                state.stability_eigenvalue = mode.as_ref().map(|(l, _)| *l);
                state.rejected_unstable = rejected;
                if is_stable(chain, state.stability_eigenvalue) {
                    return Ok(state);
                }
                log::debug!(
                    "converged to unstable state (eigenvalue {:?}), restarting",
                    state.stability_eigenvalue
                );
                rejected.get_or_insert(state.stability_eigenvalue.unwrap_or(0.0));
                state.rejected_unstable = rejected;
                if let Some((_, v)) = mode {
                    branch = Some((state.q.clone(), state.theta.clone(), v));
                }
                unstable = Some(state);
            }
            Attempt::Failed { best: b, singular: s } => {
                match s {
                    Some(info) => {
                        singular.get_or_insert(info);
                    }
                    None => all_singular = false,
                }
                if best.as_ref().is_none_or(|cur| b.residual_pose < cur.residual_pose) {
                    best = Some(b);
                }
            }
        }
        (q0, theta0) = match &branch {
            // leave the unstable branch along its softest mode, alternating
            // sides and moving farther every second attempt
            Some((q, theta, v)) => {
                let sign = if pushes % 2 == 0 { 1.0 } else { -1.0 };
                let push = sign * settings.restart_noise.max(1e-6) * 4f64.powi(pushes / 2 + 1);
                pushes += 1;
                let q1 = q + v.rows(0, chain.n()) * push;
                let t1 = theta + v.rows(chain.n(), chain.m()) * push;
                perturb_restart(&q1, &t1, settings.restart_noise, &mut rng)
            }
            None => perturb_restart(q_start, theta_start, settings.restart_noise, &mut rng),
        };
    }

    if let Some(state) = unstable {
        log::warn!("no stable equilibrium found; returning unstable branch");
        return Ok(state);
    }
    if all_singular {
        if let Some((iteration, condition)) = singular {
            return Err(Error::KinematicSingularity { iteration, condition });
        }
    }
    let best = best.expect("at least one attempt ran");
    Err(Error::NoEquilibrium {
        restarts: settings.max_restarts,
        best: Box::new(best),
    })
}
