//! Stiffness analysis of elastic manipulator chains under load.
//!
//! A chain is a product of rigid transforms, passive joints `q` and lumped
//! virtual springs `θ`. Given a prescribed end-effector pose the crate finds
//! the loaded static equilibrium, the tangent Cartesian stiffness at that
//! equilibrium, force-displacement curves and buckling points.

pub mod analysis;
pub mod chain;
pub mod cli;
pub mod diff;
pub mod equilibrium;
pub mod error;
mod linalg;
pub mod models;
pub mod se3;
pub mod stiffness;

pub use chain::{forward_kinematics, inverse_kinematics_unloaded, parse_chain, ChainBuilder, ChainModel};
pub use diff::{fd_validate, hessians, jacobians, FdReport, HessianSet, JacobianPair};
pub use equilibrium::{perturb_restart, residuals, solve_equilibrium, EquilibriumState, SolverSettings};
pub use error::{Error, Result};
pub use se3::{pose_diff, Axis, Pose, Transform, Twist6};
pub use stiffness::{aggregate_parallel, stiffness_loaded, stiffness_unloaded, StiffnessMode, StiffnessResult};
pub use analysis::{detect_buckling, displacement_sweep, BucklingReport, SweepCurve};
