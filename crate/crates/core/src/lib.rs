//! Deterministic limit of temporal-difference learning in multiagent
//! stochastic games.
//!
//! When agents interact infinitely often between two behavior updates, the
//! batch TD error of Q, SARSA and Actor-Critic learners becomes a closed-form
//! function of the behavior profile, and learning becomes a deterministic map
//! on profiles. This crate evaluates that map, its analytic Jacobian and
//! Lyapunov spectrum, runs bifurcation scans, and checks the infinite-batch
//! limit against Monte-Carlo batches.

pub mod dynamics;
pub mod environments;
pub mod error;
pub mod game;
pub mod learners;
pub mod sampler;
pub mod values;

pub use dynamics::{
    bifurcation_scan, distinct_profiles, iterate, jacobian, lyapunov_spectrum, JacobianTensor,
    ScanAxis, ScanBlock, SpectrumResult, Trajectory,
};
pub use error::{Error, Result};
pub use game::{BehaviorProfile, Game, JointActions};
pub use learners::{step, td_error, update_step, LearnerKind, LearnerParams, TdErrorTable};
pub use sampler::{sample_batch_td, validate_conversion, BatchEstimate, ValidationReport, ValidationRow};
pub use values::{performance, stationary_distribution, Values};
