//! Stochastic-game data model.
//!
//! Joint actions `(a^1, ..., a^N)` are flattened row-major, agent 1 being the
//! most significant digit. Every tensor reshape and the JSON file format use
//! this layout.

use std::collections::VecDeque;
use std::path::Path;

use ndarray::{Array3, Array4, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Row sums of stochastic tensors must match 1 within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Row-major enumeration of joint actions.
#[derive(Debug, Clone, PartialEq)]
pub struct JointActions {
    n_agents: usize,
    n_actions: usize,
    table: Vec<usize>,
}

impl JointActions {
    pub fn new(n_agents: usize, n_actions: usize) -> Self {
        let count = n_actions.pow(n_agents as u32);
        let mut table = Vec::with_capacity(count * n_agents);
        for j in 0..count {
            let mut rest = j;
            let start = table.len();
            table.resize(start + n_agents, 0);
            for k in (0..n_agents).rev() {
                table[start + k] = rest % n_actions;
                rest /= n_actions;
            }
        }
        Self {
            n_agents,
            n_actions,
            table,
        }
    }

    pub fn count(&self) -> usize {
        self.table.len() / self.n_agents.max(1)
    }

    /// Actions of every agent in joint action `j`.
    pub fn actions(&self, j: usize) -> &[usize] {
        &self.table[j * self.n_agents..(j + 1) * self.n_agents]
    }

    pub fn index(&self, actions: &[usize]) -> usize {
        actions.iter().fold(0, |acc, &a| acc * self.n_actions + a)
    }
}

/// A multiagent Markov environment.
///
/// `transitions[[s, j, s']]` is the probability of moving from `s` to `s'`
/// under joint action `j`; `rewards[[i, s, j, s']]` is agent `i`'s payoff for
/// that transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    n_agents: usize,
    n_states: usize,
    n_actions: usize,
    joint: JointActions,
    transitions: Array3<f64>,
    rewards: Array4<f64>,
    /// `sum_{s'} T[s,j,s'] R[i,s,j,s']`, shape `[N, Z, J]`.
    expected_rewards: Array3<f64>,
}

impl Game {
    pub fn new(
        n_agents: usize,
        n_states: usize,
        n_actions: usize,
        transitions: Array3<f64>,
        rewards: Array4<f64>,
    ) -> Result<Self> {
        if n_agents == 0 || n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidGame(
                "n_agents, n_states and n_actions must be positive".into(),
            ));
        }
        let joint = JointActions::new(n_agents, n_actions);
        let n_joint = joint.count();
        if transitions.dim() != (n_states, n_joint, n_states) {
            return Err(Error::Dimension(format!(
                "transitions have shape {:?}, expected {:?}",
                transitions.shape(),
                [n_states, n_joint, n_states]
            )));
        }
        if rewards.dim() != (n_agents, n_states, n_joint, n_states) {
            return Err(Error::Dimension(format!(
                "rewards have shape {:?}, expected {:?}",
                rewards.shape(),
                [n_agents, n_states, n_joint, n_states]
            )));
        }

        for s in 0..n_states {
            for j in 0..n_joint {
                let row = transitions.slice(ndarray::s![s, j, ..]);
                if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(Error::InvalidGame(format!(
                        "transition probability {p} outside [0,1] at (s={s}, a={:?})",
                        joint.actions(j)
                    )));
                }
                let sum: f64 = row.sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidGame(format!(
                        "transition row (s={s}, a={:?}) sums to {sum}",
                        joint.actions(j)
                    )));
                }
            }
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidGame("rewards must be finite".into()));
        }

        let mut expected_rewards = Array3::zeros((n_agents, n_states, n_joint));
        for ((i, s, j), e) in expected_rewards.indexed_iter_mut() {
            *e = transitions
                .slice(ndarray::s![s, j, ..])
                .iter()
                .zip(rewards.slice(ndarray::s![i, s, j, ..]))
                .map(|(t, r)| t * r)
                .sum();
        }

        let game = Self {
            n_agents,
            n_states,
            n_actions,
            joint,
            transitions,
            rewards,
            expected_rewards,
        };
        game.check_ergodic()?;
        Ok(game)
    }

    /// Strong connectivity of the support graph under uniform behavior.
    fn check_ergodic(&self) -> Result<()> {
        let z = self.n_states;
        let reach = |forward: bool| {
            let mut seen = vec![false; z];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(u) = queue.pop_front() {
                for v in 0..z {
                    let (from, to) = if forward { (u, v) } else { (v, u) };
                    let edge = (0..self.joint.count()).any(|j| self.transitions[[from, j, to]] > 0.0);
                    if edge && !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen
        };
        for (direction, seen) in [("reachable from", reach(true)), ("reaching", reach(false))] {
            if let Some(s) = seen.iter().position(|&r| !r) {
                return Err(Error::InvalidGame(format!(
                    "state graph not strongly connected: state {s} is not {direction} state 0"
                )));
            }
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn joint(&self) -> &JointActions {
        &self.joint
    }

    pub fn transitions(&self) -> &Array3<f64> {
        &self.transitions
    }

    pub fn rewards(&self) -> &Array4<f64> {
        &self.rewards
    }

    pub(crate) fn expected_rewards(&self) -> &Array3<f64> {
        &self.expected_rewards
    }

    pub fn reward_bounds(&self) -> (f64, f64) {
        self.rewards
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)))
    }

    pub fn check_profile(&self, x: &BehaviorProfile) -> Result<()> {
        let expected = (self.n_agents, self.n_states, self.n_actions);
        if x.probs.dim() != expected {
            return Err(Error::Dimension(format!(
                "profile has shape {:?}, game expects {:?}",
                x.probs.shape(),
                [expected.0, expected.1, expected.2]
            )));
        }
        Ok(())
    }

    pub fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.n_agents {
            return Err(Error::Dimension(format!(
                "agent index {agent} out of range for {} agents",
                self.n_agents
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let file = GameFile {
            n_agents: self.n_agents,
            n_states: self.n_states,
            n_actions: self.n_actions,
            transitions: nest(self.transitions.iter().copied(), &self.file_shape(false)),
            rewards: nest(self.rewards.iter().copied(), &self.file_shape(true)),
        };
        serde_json::to_value(file).expect("game serializes")
    }

    pub fn from_json(value: Value) -> Result<Self> {
        let file: GameFile = serde_json::from_value(value)?;
        let (n, z, m) = (file.n_agents, file.n_states, file.n_actions);
        if n == 0 || z == 0 || m == 0 {
            return Err(Error::InvalidGame(
                "n_agents, n_states and n_actions must be positive".into(),
            ));
        }
        let n_joint = m.pow(n as u32);
        let mut shape = vec![z];
        shape.extend(std::iter::repeat_n(m, n));
        shape.push(z);
        let t = flatten(&file.transitions, &shape, "transitions")?;
        shape.insert(0, n);
        let r = flatten(&file.rewards, &shape, "rewards")?;
        let transitions = Array3::from_shape_vec((z, n_joint, z), t)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        let rewards = Array4::from_shape_vec((n, z, n_joint, z), r)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(n, z, m, transitions, rewards)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    fn file_shape(&self, with_agent: bool) -> Vec<usize> {
        let mut shape = Vec::new();
        if with_agent {
            shape.push(self.n_agents);
        }
        shape.push(self.n_states);
        shape.extend(std::iter::repeat_n(self.n_actions, self.n_agents));
        shape.push(self.n_states);
        shape
    }
}

#[derive(Serialize, Deserialize)]
struct GameFile {
    n_agents: usize,
    n_states: usize,
    n_actions: usize,
    transitions: Value,
    rewards: Value,
}

fn nest(mut flat: impl Iterator<Item = f64>, shape: &[usize]) -> Value {
    fn build(flat: &mut dyn Iterator<Item = f64>, shape: &[usize]) -> Value {
        match shape.split_first() {
            None => Value::from(flat.next().expect("enough entries")),
            Some((&len, rest)) => Value::Array((0..len).map(|_| build(flat, rest)).collect()),
        }
    }
    build(&mut flat, shape)
}

fn flatten(value: &Value, shape: &[usize], name: &str) -> Result<Vec<f64>> {
    fn walk(v: &Value, shape: &[usize], path: &mut Vec<usize>, out: &mut Vec<f64>, name: &str) -> Result<()> {
        match shape.split_first() {
            None => {
                let x = v.as_f64().ok_or_else(|| {
                    Error::InvalidGame(format!("{name}{path:?} is not a number"))
                })?;
                out.push(x);
            }
            Some((&len, rest)) => {
                let items = v.as_array().filter(|a| a.len() == len).ok_or_else(|| {
                    Error::Dimension(format!("{name}{path:?} must be an array of length {len}"))
                })?;
                for (k, item) in items.iter().enumerate() {
                    path.push(k);
                    walk(item, rest, path, out, name)?;
                    path.pop();
                }
            }
        }
        Ok(())
    }
    let mut out = Vec::with_capacity(shape.iter().product());
    walk(value, shape, &mut Vec::new(), &mut out, name)?;
    Ok(out)
}

/// Per-agent, per-state action distributions `X[i, s, a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorProfile {
    probs: Array3<f64>,
}

impl BehaviorProfile {
    pub fn new(probs: Array3<f64>) -> Result<Self> {
        for ((i, s), row) in probs
            .lanes(Axis(2))
            .into_iter()
            .enumerate()
            .map(|(k, row)| ((k / probs.dim().1, k % probs.dim().1), row))
        {
            check_row(row, i, s)?;
        }
        Ok(Self { probs })
    }

    /// Used by the update map, whose rows are normalised by construction.
    pub(crate) fn from_normalized(probs: Array3<f64>) -> Self {
        Self { probs }
    }

    pub fn uniform(n_agents: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            probs: Array3::from_elem((n_agents, n_states, n_actions), 1.0 / n_actions as f64),
        }
    }

    /// Flat entries in agent-major, then state, then action order.
    pub fn from_flat(n_agents: usize, n_states: usize, n_actions: usize, flat: &[f64]) -> Result<Self> {
        let probs = Array3::from_shape_vec((n_agents, n_states, n_actions), flat.to_vec())
            .map_err(|_| {
                Error::Dimension(format!(
                    "expected {} entries, got {}",
                    n_agents * n_states * n_actions,
                    flat.len()
                ))
            })?;
        Self::new(probs)
    }

    /// Two-action profile from first-action probabilities listed state-major,
    /// agent-minor: `(X^1_{s1}, X^2_{s1}, ..., X^N_{s1})` for each state in turn.
    pub fn from_first_action(n_agents: usize, n_states: usize, first: &[f64]) -> Result<Self> {
        if first.len() != n_agents * n_states {
            return Err(Error::Dimension(format!(
                "expected {} first-action probabilities, got {}",
                n_agents * n_states,
                first.len()
            )));
        }
        let mut probs = Array3::zeros((n_agents, n_states, 2));
        for s in 0..n_states {
            for i in 0..n_agents {
                let p = first[s * n_agents + i];
                probs[[i, s, 0]] = p;
                probs[[i, s, 1]] = 1.0 - p;
            }
        }
        Self::new(probs)
    }

    pub fn probs(&self) -> &Array3<f64> {
        &self.probs
    }

    pub fn into_probs(self) -> Array3<f64> {
        self.probs
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.probs.dim()
    }

    pub fn get(&self, agent: usize, state: usize, action: usize) -> f64 {
        self.probs[[agent, state, action]]
    }

    pub fn is_interior(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn max_abs_diff(&self, other: &BehaviorProfile) -> f64 {
        self.probs
            .iter()
            .zip(other.probs.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.probs.iter().copied().collect()
    }
}

fn check_row(row: ArrayView1<f64>, agent: usize, state: usize) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidProfile(format!(
            "agent {agent}, state {state} has a negative or non-finite probability"
        )));
    }
    let sum = row.sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidProfile(format!(
            "agent {agent}, state {state} sums to {sum}"
        )));
    }
    Ok(())
}
