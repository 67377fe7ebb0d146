//! Displacement sweeps and buckling detection.

pub mod orthoglide;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::equilibrium::{solve_equilibrium, EquilibriumState, SolverSettings};
use crate::error::{Error, Result};
use crate::se3::Twist6;
use crate::stiffness::{stiffness_loaded, StiffnessResult};

pub use orthoglide::{orthoglide_chain, orthoglide_legs, OrthoglideGeometry, Posture};

#[derive(Debug, Clone)]
pub struct SweepSample {
    /// Displacement along the sweep direction, m.
    pub delta: f64,
    /// `F·d`, N.
    pub force: f64,
    /// `dᵀ·K^F·d`, N/m.
    pub tangent: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// The continued branch lost stability here or the spring block is
    /// singular.
    pub critical: bool,
    pub spring_block_min_eig: f64,
    pub stability_eigenvalue: Option<f64>,
    pub state: EquilibriumState,
}

#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub delta: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SweepCurve {
    /// Unit 6-vector.
    pub direction: Twist6,
    pub step: f64,
    pub samples: Vec<SweepSample>,
    /// Set when the sweep stopped early.
    pub failure: Option<SweepFailure>,
}

fn sample(chain: &ChainModel, delta: f64, d: &Twist6, state: EquilibriumState) -> Result<SweepSample> {
    let k: StiffnessResult = stiffness_loaded(chain, &state)?;
    let critical = k.critical() || state.rejected_unstable.is_some();
    Ok(SweepSample {
        delta,
        force: state.f.dot(d),
        tangent: k.directional(d),
        iterations: state.iterations,
        restarts: state.restarts,
        critical,
        spring_block_min_eig: k.spring_block_min_eig,
        stability_eigenvalue: k.stability_eigenvalue,
        state,
    })
}

/// Prescribes `start.pose ⊕ Δ·direction` for `Δ = 0, step, …, Δ_max` and
/// solves each equilibrium from the previous one. Stable branches are
/// requested regardless of `settings.require_stable`.
pub fn displacement_sweep(
    chain: &ChainModel,
    start: &EquilibriumState,
    direction: &Twist6,
    delta_max: f64,
    step: f64,
    settings: &SolverSettings,
) -> Result<SweepCurve> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("sweep step must be positive, got {step}")));
    }
    if !(delta_max >= step && delta_max.is_finite()) {
        return Err(Error::invalid(format!("sweep range {delta_max} shorter than step {step}")));
    }
    let norm = direction.norm();
    if !((norm - 1.0).abs() < 1e-9) {
        return Err(Error::invalid(format!("sweep direction must be a unit vector (norm {norm})")));
    }
    let settings = SolverSettings {
        require_stable: true,
        ..settings.clone()
    };
    let count = (delta_max / step + 1e-9).floor() as usize;
    let origin = start.pose;
    let mut q: DVector<f64> = start.q.clone();
    let mut theta: DVector<f64> = start.theta.clone();
    let mut samples = Vec::with_capacity(count + 1);
    let mut failure = None;
    for i in 0..=count {
        let delta = i as f64 * step;
        let target = origin.offset(&(direction * delta));
        let solved = solve_equilibrium(chain, &target, (&q, &theta), &settings).and_then(|s| sample(chain, delta, direction, s));
        match solved {
            Ok(s) => {
                q.copy_from(&s.state.q);
                theta.copy_from(&s.state.theta);
                log::debug!("Δ = {delta:.6e}: F = {:.6e}, k = {:.6e}", s.force, s.tangent);
                samples.push(s);
            }
            Err(e) => {
                log::warn!("sweep stopped at Δ = {delta:.6e}: {e}");
                failure = Some(SweepFailure {
                    delta,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(SweepCurve {
        direction: *direction,
        step,
        samples,
        failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detection {
    /// Stability of the continued branch was lost.
    Eigenvalue,
    /// Tangent stiffness fell by the drop factor without a stability loss.
    TangentDrop,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucklingReport {
    /// Unloaded tangent stiffness, N/m.
    pub k0: f64,
    /// Tangent before the critical sample, N/m.
    pub k1: f64,
    /// Force at the stability loss, N. Interpolated to the eigenvalue zero
    /// crossing when both neighbouring samples carry one.
    pub f_cr: f64,
    /// Displacement at the stability loss, m.
    pub delta_cr: f64,
    /// Tangent on the first stable sample after the critical one, N/m.
    pub k2: f64,
    /// Tangent at `delta1`, N/m.
    pub k3: f64,
    /// Large-deformation displacement, m.
    pub delta1: f64,
    pub detected: bool,
    pub detection: Detection,
    pub critical_index: Option<usize>,
}

impl BucklingReport {
    fn none(k0: f64) -> Self {
        Self {
            k0,
            k1: k0,
            f_cr: 0.0,
            delta_cr: 0.0,
            k2: k0,
            k3: k0,
            delta1: 0.0,
            detected: false,
            detection: Detection::None,
            critical_index: None,
        }
    }
}

/// Force and displacement where the stability eigenvalue changes sign,
/// interpolated linearly between two samples.
fn crossing(before: &SweepSample, at: &SweepSample) -> Option<(f64, f64)> {
    let (a, b) = (before.stability_eigenvalue?, at.stability_eigenvalue?);
    if !(a >= 0.0 && b < 0.0) {
        return None;
    }
    let t = a / (a - b);
    Some((
        before.force + t * (at.force - before.force),
        before.delta + t * (at.delta - before.delta),
    ))
}

pub const DEFAULT_DROP_FACTOR: f64 = 5.0;

/// Locates the critical sample of a sweep.
///
/// The first sample flagged critical by the stability test wins. Without
/// one, the first sample whose tangent is below the largest preceding
/// tangent divided by `drop_factor` is used.
pub fn detect_buckling(curve: &SweepCurve, drop_factor: f64) -> BucklingReport {
    let s = &curve.samples;
    let Some(first) = s.first() else {
        return BucklingReport::none(0.0);
    };
    let k0 = first.tangent;
    if s.len() < 10 {
        return BucklingReport::none(k0);
    }
    let by_eigen = (1..s.len()).find(|&i| s[i].critical);
    let by_drop = {
        let mut peak = s[0].tangent;
        let mut found = None;
        for (i, x) in s.iter().enumerate().skip(1) {
            if x.tangent < peak / drop_factor {
                found = Some(i);
                break;
            }
            peak = peak.max(x.tangent);
        }
        found
    };
    let (index, detection) = match (by_eigen, by_drop) {
        (Some(i), _) => (i, Detection::Eigenvalue),
        (None, Some(i)) => (i, Detection::TangentDrop),
        (None, None) => return BucklingReport::none(k0),
    };
    if let (Some(e), Some(d)) = (by_eigen, by_drop) {
        if e.abs_diff(d) > 2 {
            log::info!("stability loss at sample {e}, tangent drop at sample {d}");
        }
    }
    if index + 1 >= s.len() {
        return BucklingReport::none(k0);
    }
    // the branch just past a stability loss may still be the unstable one;
    // the post-critical tangent is read on the first stable sample
    let after = (index + 1..s.len()).find(|&i| !s[i].critical).unwrap_or(index + 1);
    let delta_max = s.last().map_or(0.0, |x| x.delta);
    let delta_cr = s[index].delta;
    let delta1 = (2.0 * delta_cr).min(delta_max);
    let i1 = s
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.delta - delta1).abs().total_cmp(&(b.1.delta - delta1).abs()))
        .map_or(index, |(i, _)| i);
    let (f_cr, delta_cr) = crossing(&s[index - 1], &s[index]).unwrap_or((s[index].force, delta_cr));
    BucklingReport {
        k0,
        k1: s[index - 1].tangent,
        f_cr,
        delta_cr,
        k2: s[after].tangent,
        k3: s[i1].tangent,
        delta1: s[i1].delta,
        detected: true,
        detection,
        critical_index: Some(index),
    }
}
