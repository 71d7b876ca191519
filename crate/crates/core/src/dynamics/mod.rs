//! Iterating the learning map and analysing its orbits.

mod jacobian;
mod lyapunov;
mod scan;

pub use jacobian::{jacobian, JacobianTensor, TIE_TOL};
pub use lyapunov::{lyapunov_spectrum, spectral_radius, SpectrumResult};
pub use scan::{bifurcation_scan, detect_period, distinct_profiles, ScanAxis, ScanBlock, HASH_GRANULARITY};

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::game::{BehaviorProfile, Game};
use crate::learners::{step, LearnerParams};
use crate::values::performance;

/// Profiles visited by the learning map, with per-step performance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `points[0]` is the initial profile.
    pub points: Vec<BehaviorProfile>,
    /// Long-run average reward per agent at each point; NaN where the
    /// effective chain is numerically reducible and the average is undefined.
    pub performance: Vec<Array1<f64>>,
    /// First step whose profile differs from its predecessor by less than
    /// `epsilon` in max-abs norm.
    pub converged_at: Option<usize>,
    pub epsilon: f64,
}

impl Trajectory {
    pub fn last(&self) -> &BehaviorProfile {
        self.points.last().expect("trajectory holds the initial profile")
    }

    pub fn final_performance(&self) -> &Array1<f64> {
        self.performance.last().expect("trajectory holds the initial profile")
    }
}

/// Applies the learning map up to `max_steps` times, stopping early once two
/// successive profiles are closer than `epsilon`.
///
/// Actor-Critic orbits can pass through profiles whose effective chain has a
/// second eigenvalue within numerical tolerance of 1. The map is still defined
/// there, so only the performance of that step is reported as NaN.
pub fn iterate(
    game: &Game,
    x0: &BehaviorProfile,
    params: &LearnerParams,
    max_steps: usize,
    epsilon: f64,
) -> Result<Trajectory> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} must be positive")));
    }
    params.validate()?;
    game.check_profile(x0)?;
    let at = |step: usize| move |e: Error| Error::AtStep { step, source: Box::new(e) };

    let mut points = vec![x0.clone()];
    let perf_at = |x: &BehaviorProfile, t: usize| match performance(game, x, &params.gamma) {
        Err(Error::NonErgodic(_)) => Ok(Array1::from_elem(game.n_agents(), f64::NAN)),
        other => other.map_err(at(t)),
    };
    let mut perf = vec![perf_at(x0, 0)?];
    let mut converged_at = None;
    for t in 1..=max_steps {
        let prev = points.last().expect("non-empty");
        let next = step(game, prev, params).map_err(at(t))?;
        let delta = next.max_abs_diff(prev);
        perf.push(perf_at(&next, t)?);
        points.push(next);
        if delta < epsilon {
            converged_at = Some(t);
            break;
        }
    }
    Ok(Trajectory {
        points,
        performance: perf,
        converged_at,
        epsilon,
    })
}
