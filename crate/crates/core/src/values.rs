//! Behavioral and environmental averages, stationary distributions and exact
//! value functions of a fixed behavior profile.
//!
//! All returns are `(1 - gamma)`-normalised, so values live in reward units.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Array3, Axis};

use crate::error::{Error, Result};
use crate::game::{BehaviorProfile, Game};

/// Eigenvalues closer than this to 1 count as unit eigenvalues.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-9;
const POWER_ITERATIONS: usize = 1_000_000;
const POWER_TOL: f64 = 1e-12;
const CLAMP_BELOW: f64 = 1e-15;

/// Joint-action weights of a profile, with and without each agent.
#[derive(Debug, Clone)]
pub struct Averages<'a> {
    game: &'a Game,
    x: &'a BehaviorProfile,
    /// `prod_k X[k, s, a^k]`, shape `[Z, J]`.
    weights: Array2<f64>,
    /// `prod_{k != i} X[k, s, a^k]`, shape `[N, Z, J]`.
    weights_except: Array3<f64>,
}

impl<'a> Averages<'a> {
    pub fn new(game: &'a Game, x: &'a BehaviorProfile) -> Result<Self> {
        game.check_profile(x)?;
        let (n, z) = (game.n_agents(), game.n_states());
        let joint = game.joint();
        let probs = x.probs();
        let mut weights = Array2::zeros((z, joint.count()));
        let mut weights_except = Array3::zeros((n, z, joint.count()));
        for s in 0..z {
            for j in 0..joint.count() {
                let acts = joint.actions(j);
                weights[[s, j]] = (0..n).map(|k| probs[[k, s, acts[k]]]).product();
                for i in 0..n {
                    weights_except[[i, s, j]] = (0..n)
                        .filter(|&k| k != i)
                        .map(|k| probs[[k, s, acts[k]]])
                        .product();
                }
            }
        }
        Ok(Self {
            game,
            x,
            weights,
            weights_except,
        })
    }

    pub fn game(&self) -> &'a Game {
        self.game
    }

    pub fn profile(&self) -> &'a BehaviorProfile {
        self.x
    }

    pub(crate) fn weights_except(&self) -> &Array3<f64> {
        &self.weights_except
    }

    /// Effective Markov chain `<T>_{ss'}` under the whole profile.
    pub fn effective_transitions(&self) -> DMatrix<f64> {
        let z = self.game.n_states();
        let t = self.game.transitions();
        DMatrix::from_fn(z, z, |s, s2| {
            self.weights
                .row(s)
                .iter()
                .enumerate()
                .map(|(j, w)| w * t[[s, j, s2]])
                .sum()
        })
    }

    /// `<R>^i_s`, shape `[N, Z]`.
    pub fn reward_state(&self) -> Array2<f64> {
        let e = self.game.expected_rewards();
        Array2::from_shape_fn((self.game.n_agents(), self.game.n_states()), |(i, s)| {
            self.weights.row(s).dot(&e.slice(ndarray::s![i, s, ..]))
        })
    }

    /// `<R>^i_{sa}` with agent `i`'s action fixed, shape `[Z, M]`.
    pub fn reward_state_action(&self, agent: usize) -> Array2<f64> {
        let e = self.game.expected_rewards();
        let joint = self.game.joint();
        let mut out = Array2::zeros((self.game.n_states(), self.game.n_actions()));
        for s in 0..self.game.n_states() {
            for j in 0..joint.count() {
                let a = joint.actions(j)[agent];
                out[[s, a]] += self.weights_except[[agent, s, j]] * e[[agent, s, j]];
            }
        }
        out
    }

    /// `<T>^{i,a}_{ss'}` with agent `i`'s action fixed, shape `[Z, M, Z]`.
    pub fn transitions_state_action(&self, agent: usize) -> Array3<f64> {
        let (z, m) = (self.game.n_states(), self.game.n_actions());
        let t = self.game.transitions();
        let joint = self.game.joint();
        let mut out = Array3::zeros((z, m, z));
        for s in 0..z {
            for j in 0..joint.count() {
                let a = joint.actions(j)[agent];
                let w = self.weights_except[[agent, s, j]];
                for s2 in 0..z {
                    out[[s, a, s2]] += w * t[[s, j, s2]];
                }
            }
        }
        out
    }

    /// State values `V^i_s` for every agent, shape `[N, Z]`.
    pub fn state_values(&self, gammas: &[f64]) -> Result<Array2<f64>> {
        check_gammas(gammas, self.game.n_agents())?;
        let z = self.game.n_states();
        let markov = self.effective_transitions();
        let rewards = self.reward_state();
        let mut values = Array2::zeros((self.game.n_agents(), z));
        for (i, &gamma) in gammas.iter().enumerate() {
            let system = DMatrix::identity(z, z) - markov.scale(gamma);
            let rhs = DVector::from_iterator(z, rewards.row(i).iter().map(|r| (1.0 - gamma) * r));
            let v = system.lu().solve(&rhs).ok_or_else(|| {
                Error::Singular(format!("value system of agent {i} (gamma = {gamma})"))
            })?;
            values.row_mut(i).assign(&Array1::from_iter(v.iter().copied()));
        }
        Ok(values)
    }

    /// Averages a per-next-state quantity `w_{s'}` over the transitions that
    /// follow `(s, a)` for `agent`: `sum_{s'} <T>^{i,a}_{ss'} w_{s'}`.
    pub fn next_average(&self, agent: usize, next: &[f64]) -> Array2<f64> {
        let ta = self.transitions_state_action(agent);
        let (z, m) = (self.game.n_states(), self.game.n_actions());
        Array2::from_shape_fn((z, m), |(s, a)| {
            (0..z).map(|s2| ta[[s, a, s2]] * next[s2]).sum()
        })
    }

    /// State values and state-action values together.
    pub fn values(&self, gammas: &[f64]) -> Result<Values> {
        let v = self.state_values(gammas)?;
        let (n, z, m) = (self.game.n_agents(), self.game.n_states(), self.game.n_actions());
        let mut q = Array3::zeros((n, z, m));
        for (i, &gamma) in gammas.iter().enumerate() {
            let r = self.reward_state_action(i);
            let next = self.next_average(i, v.row(i).as_slice().expect("contiguous"));
            q.index_axis_mut(Axis(0), i)
                .assign(&(r * (1.0 - gamma) + next * gamma));
        }
        Ok(Values { v, q })
    }
}

/// Exact state values `[N, Z]` and state-action values `[N, Z, M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    pub v: Array2<f64>,
    pub q: Array3<f64>,
}

pub(crate) fn check_gammas(gammas: &[f64], n_agents: usize) -> Result<()> {
    if gammas.len() != n_agents {
        return Err(Error::Dimension(format!(
            "{} discount factors for {n_agents} agents",
            gammas.len()
        )));
    }
    if let Some(g) = gammas.iter().find(|g| !(0.0..1.0).contains(*g)) {
        return Err(Error::Parameter(format!("discount factor {g} outside [0, 1)")));
    }
    Ok(())
}

pub fn effective_transition_matrix(game: &Game, x: &BehaviorProfile) -> Result<DMatrix<f64>> {
    Ok(Averages::new(game, x)?.effective_transitions())
}

/// Stationary distribution of a row-stochastic, single-recurrent-class chain.
pub fn stationary_distribution(markov: &DMatrix<f64>) -> Result<DVector<f64>> {
    let z = markov.nrows();
    if z == 0 || markov.ncols() != z {
        return Err(Error::Dimension(format!(
            "markov matrix must be square and non-empty, got {}x{}",
            z,
            markov.ncols()
        )));
    }
    if markov.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("markov matrix has non-finite entries".into()));
    }

    let unit = markov
        .clone()
        .complex_eigenvalues()
        .iter()
        .filter(|l| (l.re - 1.0).hypot(l.im) < UNIT_EIGENVALUE_TOL)
        .count();
    if unit > 1 {
        return Err(Error::NonErgodic(unit));
    }

    let direct = if unit == 1 { null_vector(markov) } else { None };
    let sigma = match direct {
        Some(v) => v,
        None => power_iteration(markov)?,
    };
    Ok(clamp_normalize(sigma))
}

/// Solves `(P^T - I) sigma = 0` with the last equation replaced by `sum sigma = 1`.
fn null_vector(markov: &DMatrix<f64>) -> Option<DVector<f64>> {
    let z = markov.nrows();
    let mut system = markov.transpose() - DMatrix::identity(z, z);
    system.row_mut(z - 1).fill(1.0);
    let mut rhs = DVector::zeros(z);
    rhs[z - 1] = 1.0;
    let v = system.lu().solve(&rhs)?;
    v.iter().all(|p| p.is_finite() && *p > -1e-9).then_some(v)
}

/// Power iteration on the lazy chain `(P + I) / 2`, which shares the
/// stationary vector and is aperiodic.
fn power_iteration(markov: &DMatrix<f64>) -> Result<DVector<f64>> {
    let z = markov.nrows();
    let lazy = (markov + DMatrix::identity(z, z)).scale(0.5);
    let lazy_t = lazy.transpose();
    let mut v = DVector::from_element(z, 1.0 / z as f64);
    for _ in 0..POWER_ITERATIONS {
        let next = &lazy_t * &v;
        let delta = (&next - &v).amax();
        v = next;
        if delta < POWER_TOL {
            return Ok(v);
        }
    }
    Err(Error::Numeric("stationary distribution power iteration did not converge".into()))
}

fn clamp_normalize(mut v: DVector<f64>) -> DVector<f64> {
    v.apply(|p| {
        if *p < CLAMP_BELOW {
            *p = 0.0
        }
    });
    let total = v.sum();
    v / total
}

pub fn avg_reward_state(game: &Game, x: &BehaviorProfile) -> Result<Array2<f64>> {
    Ok(Averages::new(game, x)?.reward_state())
}

pub fn avg_reward_state_action(game: &Game, x: &BehaviorProfile, agent: usize) -> Result<Array2<f64>> {
    game.check_agent(agent)?;
    Ok(Averages::new(game, x)?.reward_state_action(agent))
}

pub fn state_values(game: &Game, x: &BehaviorProfile, gammas: &[f64]) -> Result<Array2<f64>> {
    Averages::new(game, x)?.state_values(gammas)
}

pub fn state_action_values(game: &Game, x: &BehaviorProfile, gammas: &[f64]) -> Result<Array3<f64>> {
    Ok(Averages::new(game, x)?.values(gammas)?.q)
}

/// Long-run average reward per step, `sigma(X) . <R>^i`, for every agent.
pub fn performance(game: &Game, x: &BehaviorProfile, gammas: &[f64]) -> Result<Array1<f64>> {
    check_gammas(gammas, game.n_agents())?;
    let avg = Averages::new(game, x)?;
    let sigma = stationary_distribution(&avg.effective_transitions())?;
    let rewards = avg.reward_state();
    Ok(rewards
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(sigma.iter()).map(|(a, b)| a * b).sum())
        .collect())
}
