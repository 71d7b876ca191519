use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lyapunov::window;
use crate::error::{Error, Result};
use crate::game::{BehaviorProfile, Game};
use crate::learners::LearnerParams;

/// Grid size used to decide whether two recorded profiles are the same point.
pub const HASH_GRANULARITY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanAxis {
    Alpha,
    Beta,
    Gamma,
}

impl ScanAxis {
    /// Copy of `params` with the scanned parameter set to `value` for every agent.
    pub fn apply(self, params: &LearnerParams, value: f64) -> LearnerParams {
        let mut out = params.clone();
        let target = match self {
            ScanAxis::Alpha => &mut out.alpha,
            ScanAxis::Beta => &mut out.beta,
            ScanAxis::Gamma => &mut out.gamma,
        };
        target.iter_mut().for_each(|v| *v = value);
        out
    }
}

impl fmt::Display for ScanAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanAxis::Alpha => "alpha",
            ScanAxis::Beta => "beta",
            ScanAxis::Gamma => "gamma",
        })
    }
}

impl FromStr for ScanAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" => Ok(ScanAxis::Alpha),
            "beta" => Ok(ScanAxis::Beta),
            "gamma" => Ok(ScanAxis::Gamma),
            other => Err(Error::Parameter(format!("unknown scan axis {other:?}"))),
        }
    }
}

/// Recorded window for one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanBlock {
    pub param_value: f64,
    pub points: Vec<BehaviorProfile>,
    pub lyap_max: Option<f64>,
    /// Number of distinct recorded profiles at [`HASH_GRANULARITY`].
    pub distinct: usize,
    pub error: Option<String>,
}

/// Runs one window per parameter value in parallel. Blocks come back in the
/// order of `values`; a failing value yields a block with `error` set.
pub fn bifurcation_scan(
    game: &Game,
    x0: &BehaviorProfile,
    params: &LearnerParams,
    axis: ScanAxis,
    values: &[f64],
    record_steps: usize,
    transient: usize,
) -> Result<Vec<ScanBlock>> {
    game.check_profile(x0)?;
    if record_steps == 0 {
        return Err(Error::Parameter("scan needs at least one recorded step".into()));
    }
    Ok(values
        .par_iter()
        .map(|&value| {
            let run = || {
                let p = axis.apply(params, value);
                p.validate()?;
                window(game, x0, &p, transient, record_steps)
            };
            match run() {
                Ok(w) => ScanBlock {
                    param_value: value,
                    distinct: distinct_profiles(&w.points, HASH_GRANULARITY),
                    lyap_max: w.spectrum.max(),
                    points: w.points,
                    error: None,
                },
                Err(e) => ScanBlock {
                    param_value: value,
                    points: Vec::new(),
                    lyap_max: None,
                    distinct: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Number of distinct profiles after snapping every entry to a grid of size
/// `granularity`.
pub fn distinct_profiles(points: &[BehaviorProfile], granularity: f64) -> usize {
    points
        .iter()
        .map(|p| {
            p.probs()
                .iter()
                .map(|v| (v / granularity).round() as i64)
                .collect::<Vec<_>>()
        })
        .collect::<HashSet<_>>()
        .len()
}

/// Smallest `p` with `|x_{t+p} - x_t| < eps` for every recorded `t`, looking
/// only at periods up to half the window.
pub fn detect_period(points: &[BehaviorProfile], eps: f64) -> Option<usize> {
    (1..=points.len() / 2).find(|&p| {
        points
            .iter()
            .zip(&points[p..])
            .all(|(a, b)| a.max_abs_diff(b) < eps)
    })
}
