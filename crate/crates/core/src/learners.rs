//! Deterministic-limit temporal-difference errors and the behavior update map.
//!
//! In the infinite-batch limit every sample average over visits of `(s, a)`
//! becomes an average over the other agents' behavior and the transition
//! tensor, and the current-state estimate of Q/SARSA becomes
//! `log X / beta` (up to a per-state constant the update ignores).

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{BehaviorProfile, Game};
use crate::values::{check_gammas, Averages, Values};

/// Profiles with an entry below this are treated as boundary profiles by the
/// Q and SARSA learners.
pub const BOUNDARY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Q,
    Sarsa,
    #[serde(rename = "ac")]
    ActorCritic,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 3] = [LearnerKind::Q, LearnerKind::Sarsa, LearnerKind::ActorCritic];

    /// Whether the TD error carries the `-log X / beta` current-state term.
    pub fn has_log_term(self) -> bool {
        !matches!(self, LearnerKind::ActorCritic)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Q => "q",
            LearnerKind::Sarsa => "sarsa",
            LearnerKind::ActorCritic => "ac",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q" => Ok(LearnerKind::Q),
            "sarsa" => Ok(LearnerKind::Sarsa),
            "ac" | "actor-critic" => Ok(LearnerKind::ActorCritic),
            other => Err(Error::Parameter(format!("unknown learner kind {other:?}"))),
        }
    }
}

/// Per-agent learning rate, intensity of choice and discount factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub kind: LearnerKind,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl LearnerParams {
    pub fn new(kind: LearnerKind, alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let params = Self {
            kind,
            alpha,
            beta,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn homogeneous(kind: LearnerKind, n_agents: usize, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(
            kind,
            vec![alpha; n_agents],
            vec![beta; n_agents],
            vec![gamma; n_agents],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        if n == 0 || self.beta.len() != n || self.gamma.len() != n {
            return Err(Error::Dimension(format!(
                "parameter vectors have lengths alpha={}, beta={}, gamma={}",
                n,
                self.beta.len(),
                self.gamma.len()
            )));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Parameter(format!("learning rate {a} outside (0, 1)")));
        }
        if let Some(b) = self.beta.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::Parameter(format!("intensity of choice {b} must be positive")));
        }
        check_gammas(&self.gamma, n)
    }

    pub fn n_agents(&self) -> usize {
        self.alpha.len()
    }

    fn check_game(&self, game: &Game) -> Result<()> {
        if self.n_agents() != game.n_agents() {
            return Err(Error::Dimension(format!(
                "parameters for {} agents, game has {}",
                self.n_agents(),
                game.n_agents()
            )));
        }
        Ok(())
    }
}

/// TD errors `TD^i_{sa}`, shape `[N, Z, M]`, in reward units.
#[derive(Debug, Clone, PartialEq)]
pub struct TdErrorTable {
    pub errors: Array3<f64>,
}

/// Per-state next-value estimate of `agent` for the given learner kind:
/// `max_b Q`, `sum_b X Q`, or `V`.
pub(crate) fn next_state_estimate(kind: LearnerKind, values: &Values, x: &BehaviorProfile, agent: usize) -> Vec<f64> {
    let q = values.q.index_axis(Axis(0), agent);
    match kind {
        LearnerKind::Q => q
            .rows()
            .into_iter()
            .map(|row| row.fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
            .collect(),
        LearnerKind::Sarsa => q
            .rows()
            .into_iter()
            .zip(x.probs().index_axis(Axis(0), agent).rows())
            .map(|(qr, xr)| qr.dot(&xr))
            .collect(),
        LearnerKind::ActorCritic => values.v.row(agent).to_vec(),
    }
}

fn next_value(kind: LearnerKind, game: &Game, x: &BehaviorProfile, gammas: &[f64], agent: usize) -> Result<Array2<f64>> {
    game.check_agent(agent)?;
    let avg = Averages::new(game, x)?;
    let values = avg.values(gammas)?;
    Ok(avg.next_average(agent, &next_state_estimate(kind, &values, x, agent)))
}

/// Expected best next state-action value after `(s, a)`.
pub fn max_next_q(game: &Game, x: &BehaviorProfile, gammas: &[f64], agent: usize) -> Result<Array2<f64>> {
    next_value(LearnerKind::Q, game, x, gammas, agent)
}

/// Expected on-policy next state-action value after `(s, a)`.
pub fn next_q(game: &Game, x: &BehaviorProfile, gammas: &[f64], agent: usize) -> Result<Array2<f64>> {
    next_value(LearnerKind::Sarsa, game, x, gammas, agent)
}

/// Expected next state value after `(s, a)`.
pub fn next_v(game: &Game, x: &BehaviorProfile, gammas: &[f64], agent: usize) -> Result<Array2<f64>> {
    next_value(LearnerKind::ActorCritic, game, x, gammas, agent)
}

/// TD error without the current-state estimate:
/// `(1 - gamma) <R>_{sa} + gamma * next`.
pub fn truncated_td(game: &Game, x: &BehaviorProfile, params: &LearnerParams) -> Result<Array3<f64>> {
    params.check_game(game)?;
    let avg = Averages::new(game, x)?;
    let values = avg.values(&params.gamma)?;
    Ok(truncated_td_from(&avg, &values, params))
}

pub(crate) fn truncated_td_from(avg: &Averages, values: &Values, params: &LearnerParams) -> Array3<f64> {
    let game = avg.game();
    let mut td = Array3::zeros((game.n_agents(), game.n_states(), game.n_actions()));
    for (i, &gamma) in params.gamma.iter().enumerate() {
        let next = avg.next_average(i, &next_state_estimate(params.kind, values, avg.profile(), i));
        let reward = avg.reward_state_action(i);
        td.index_axis_mut(Axis(0), i)
            .assign(&(reward * (1.0 - gamma) + next * gamma));
    }
    td
}

pub(crate) fn check_interior(x: &BehaviorProfile) -> Result<()> {
    match x.probs().indexed_iter().find(|(_, &p)| p < BOUNDARY_FLOOR) {
        Some(((agent, state, action), &value)) => Err(Error::Boundary {
            agent,
            state,
            action,
            value,
        }),
        None => Ok(()),
    }
}

pub fn td_error(game: &Game, x: &BehaviorProfile, params: &LearnerParams) -> Result<TdErrorTable> {
    if params.kind.has_log_term() {
        check_interior(x)?;
    }
    let mut errors = truncated_td(game, x, params)?;
    if params.kind.has_log_term() {
        Zip::indexed(&mut errors)
            .and(x.probs())
            .for_each(|(i, _, _), td, &p| *td -= p.ln() / params.beta[i]);
    }
    Ok(TdErrorTable { errors })
}

/// Softmax-style behavior update
/// `X'_{sa} = X_{sa} exp(alpha beta TD_{sa}) / sum_b X_{sb} exp(alpha beta TD_{sb})`.
///
/// The exponent is shifted by its maximum over the support of each row, so
/// large `beta * TD` cannot overflow and exact zeros stay zero.
pub fn update_step(x: &BehaviorProfile, td: &TdErrorTable, params: &LearnerParams) -> Result<BehaviorProfile> {
    let probs = x.probs();
    if td.errors.dim() != probs.dim() {
        return Err(Error::Dimension(format!(
            "TD table has shape {:?}, profile {:?}",
            td.errors.shape(),
            probs.shape()
        )));
    }
    if params.n_agents() != probs.dim().0 {
        return Err(Error::Dimension(format!(
            "parameters for {} agents, profile has {}",
            params.n_agents(),
            probs.dim().0
        )));
    }
    if let Some(((i, s, a), v)) = td.errors.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "TD error {v} at agent {i}, state {s}, action {a}"
        )));
    }

    let (n, z, m) = probs.dim();
    let mut next = Array3::zeros((n, z, m));
    for i in 0..n {
        let rate = params.alpha[i] * params.beta[i];
        for s in 0..z {
            let shift = (0..m)
                .filter(|&a| probs[[i, s, a]] > 0.0)
                .map(|a| rate * td.errors[[i, s, a]])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for a in 0..m {
                let p = probs[[i, s, a]];
                let w = if p > 0.0 { p * (rate * td.errors[[i, s, a]] - shift).exp() } else { 0.0 };
                next[[i, s, a]] = w;
                total += w;
            }
            for a in 0..m {
                next[[i, s, a]] /= total;
            }
        }
    }
    Ok(BehaviorProfile::from_normalized(next))
}

/// One application of the learning map: `update_step(x, td_error(x))`.
pub fn step(game: &Game, x: &BehaviorProfile, params: &LearnerParams) -> Result<BehaviorProfile> {
    let td = td_error(game, x, params)?;
    update_step(x, &td, params)
}
