//! Analytic Jacobian of the learning map.
//!
//! Writing the update as `f = A / B` with numerator
//! `A_{sa} = X_{sa}^{1-alpha} exp(alpha beta TDhat_{sa})` (Q, SARSA) or
//! `A_{sa} = X_{sa} exp(alpha beta TDhat_{sa})` (AC), where `TDhat` is the TD
//! error without its current-state estimate, and `B_s = sum_c A_{sc}`, the
//! derivative follows from the quotient rule `(A'B - B'A) / B^2`. The state
//! values enter through `V = (1 - gamma) M^{-1} <R>` with
//! `M = I - gamma <T>` and `(M^{-1})' = -M^{-1} M' M^{-1}`.
//!
//! Partials are first taken with every entry `X[j, r, b]` treated as an
//! independent variable. The stored tensor then applies the simplex
//! convention `dX_{sa}/dX_{rb} = delta_{sr} (2 delta_{ab} - 1)`, i.e. column
//! `(j, r, b)` is `d/dX_{jrb} - sum_{c != b} d/dX_{jrc}`. For two actions this
//! is the derivative along `+h` on `b` and `-h` on the other action.

use nalgebra::DMatrix;
use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};
use crate::game::{BehaviorProfile, Game};
use crate::learners::{check_interior, next_state_estimate, truncated_td_from, LearnerKind, LearnerParams};
use crate::values::Averages;

/// Two state-action values closer than this make the greedy choice ambiguous.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct JacobianTensor {
    n_agents: usize,
    n_states: usize,
    n_actions: usize,
    /// Unconstrained partials `df_{isa} / dX_{jrb}`, flattened `(i, s, a)` major.
    partials: DMatrix<f64>,
    /// Whether a greedy argmax was tied within [`TIE_TOL`]; the returned
    /// derivative then uses the lowest tied action.
    pub nondifferentiable: bool,
}

impl JacobianTensor {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_agents, self.n_states, self.n_actions)
    }

    fn flat(&self, i: usize, s: usize, a: usize) -> usize {
        (i * self.n_states + s) * self.n_actions + a
    }

    /// For more than two actions the simplex convention is not a true
    /// directional derivative of the simplex-restricted map.
    pub fn is_convention_only(&self) -> bool {
        self.n_actions > 2
    }

    /// `df^i_{sa} / dX^j_{rb}` under the simplex convention.
    pub fn entry(&self, i: usize, s: usize, a: usize, j: usize, r: usize, b: usize) -> f64 {
        let row = self.flat(i, s, a);
        (0..self.n_actions)
            .map(|c| {
                let p = self.partials[(row, self.flat(j, r, c))];
                if c == b { p } else { -p }
            })
            .sum()
    }

    /// The full tensor as a square matrix of side `N * Z * M`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.partials.nrows();
        let m = self.n_actions;
        DMatrix::from_fn(n, n, |row, col| {
            let base = col - col % m;
            (0..m)
                .map(|c| {
                    let p = self.partials[(row, base + c)];
                    if base + c == col { p } else { -p }
                })
                .sum()
        })
    }

    pub fn partials(&self) -> &DMatrix<f64> {
        &self.partials
    }

    /// Jacobian in the simplex chart that drops the last action of every
    /// (agent, state): coordinates `X[j, r, b]` for `b < M - 1`, with the last
    /// probability implied. Side `N * Z * (M - 1)`.
    pub fn reduced(&self) -> DMatrix<f64> {
        let m = self.n_actions;
        let k = m - 1;
        let side = self.n_agents * self.n_states * k;
        DMatrix::from_fn(side, side, |row, col| {
            let (rb, ra) = (row / k, row % k);
            let (cb, ca) = (col / k, col % k);
            let prow = rb * m + ra;
            self.partials[(prow, cb * m + ca)] - self.partials[(prow, cb * m + k)]
        })
    }
}

/// Analytic Jacobian of [`crate::learners::step`] at `x`.
pub fn jacobian(game: &Game, x: &BehaviorProfile, params: &LearnerParams) -> Result<JacobianTensor> {
    params.validate()?;
    if params.n_agents() != game.n_agents() {
        return Err(Error::Dimension(format!(
            "parameters for {} agents, game has {}",
            params.n_agents(),
            game.n_agents()
        )));
    }
    let kind = params.kind;
    if kind.has_log_term() {
        check_interior(x)?;
    }
    let ctx = Context::new(game, x, params)?;
    let (n, z, m) = (game.n_agents(), game.n_states(), game.n_actions());
    let dim = n * z * m;
    let mut partials = DMatrix::zeros(dim, dim);
    for j in 0..n {
        for r in 0..z {
            for b in 0..m {
                let col = (j * z + r) * m + b;
                let df = ctx.column(j, r, b);
                for (row, v) in df.iter().enumerate() {
                    partials[(row, col)] = *v;
                }
            }
        }
    }
    Ok(JacobianTensor {
        n_agents: n,
        n_states: z,
        n_actions: m,
        partials,
        nondifferentiable: ctx.tied,
    })
}

/// Everything the derivative needs that does not depend on the variable.
struct Context<'a> {
    avg: Averages<'a>,
    params: &'a LearnerParams,
    probs: &'a Array3<f64>,
    v: Array2<f64>,
    q: Array3<f64>,
    /// `<R>^i_s`.
    reward_state: Array2<f64>,
    /// `(M^i)^{-1}` per agent.
    inverse: Vec<DMatrix<f64>>,
    /// `<T>^{i,a}_{ss'}` per agent.
    trans_sa: Vec<Array3<f64>>,
    /// `<R>^i_{sa}` with agent `j`'s action fixed instead: `[i][j]`, `[Z, M]`.
    reward_fixed: Vec<Vec<Array2<f64>>>,
    /// Next-state estimate per agent and state.
    next: Vec<Vec<f64>>,
    /// Greedy action per agent and state (Q learner).
    greedy: Vec<Vec<usize>>,
    /// Numerator `A` up to a per-(agent, state) factor, and its row sums `B`.
    numer: Array3<f64>,
    denom: Array2<f64>,
    /// `exp(alpha beta TDhat)` with the same per-row factor.
    boltz: Array3<f64>,
    tied: bool,
}

impl<'a> Context<'a> {
    fn new(game: &'a Game, x: &'a BehaviorProfile, params: &'a LearnerParams) -> Result<Self> {
        let avg = Averages::new(game, x)?;
        let values = avg.values(&params.gamma)?;
        let (n, z, m) = (game.n_agents(), game.n_states(), game.n_actions());
        let probs = x.probs();
        let markov = avg.effective_transitions();

        let mut inverse = Vec::with_capacity(n);
        for (i, &gamma) in params.gamma.iter().enumerate() {
            let system = DMatrix::identity(z, z) - markov.scale(gamma);
            inverse.push(system.try_inverse().ok_or_else(|| {
                Error::Singular(format!("value system of agent {i} (gamma = {gamma})"))
            })?);
        }

        let trans_sa = (0..n).map(|i| avg.transitions_state_action(i)).collect();
        let reward_fixed = (0..n)
            .map(|i| (0..n).map(|j| reward_with_fixed(&avg, i, j)).collect())
            .collect();
        let next = (0..n)
            .map(|i| next_state_estimate(params.kind, &values, x, i))
            .collect();

        let mut tied = false;
        let mut greedy = vec![vec![0; z]; n];
        if params.kind == LearnerKind::Q {
            for i in 0..n {
                for s in 0..z {
                    let row = values.q.slice(ndarray::s![i, s, ..]);
                    let best = (0..m).fold(0, |best, a| if row[a] > row[best] { a } else { best });
                    greedy[i][s] = best;
                    tied |= (0..m).any(|a| a != best && (row[best] - row[a]).abs() <= TIE_TOL);
                }
            }
        }

        let td_hat = truncated_td_from(&avg, &values, params);
        let mut boltz = Array3::zeros((n, z, m));
        let mut numer = Array3::zeros((n, z, m));
        for i in 0..n {
            let rate = params.alpha[i] * params.beta[i];
            for s in 0..z {
                let shift = (0..m)
                    .map(|a| rate * td_hat[[i, s, a]])
                    .fold(f64::NEG_INFINITY, f64::max);
                for a in 0..m {
                    let e = (rate * td_hat[[i, s, a]] - shift).exp();
                    boltz[[i, s, a]] = e;
                    let p = probs[[i, s, a]];
                    numer[[i, s, a]] = if params.kind.has_log_term() {
                        p.powf(1.0 - params.alpha[i]) * e
                    } else {
                        p * e
                    };
                }
            }
        }
        let denom = numer.sum_axis(Axis(2));

        Ok(Self {
            reward_state: avg.reward_state(),
            avg,
            params,
            probs,
            v: values.v,
            q: values.q,
            inverse,
            trans_sa,
            reward_fixed,
            next,
            greedy,
            numer,
            denom,
            boltz,
            tied,
        })
    }

    /// `prod_{k not in {i, j}} X[k, s, a^k]` for joint action `joint`.
    fn pair_weight(&self, s: usize, joint: &[usize], i: usize, j: usize) -> f64 {
        (0..joint.len())
            .filter(|&k| k != i && k != j)
            .map(|k| self.probs[[k, s, joint[k]]])
            .product()
    }

    /// Partials of `f` with respect to `X[j, r, b]`, flattened `(i, s, a)`.
    fn column(&self, j: usize, r: usize, b: usize) -> Vec<f64> {
        let game = self.avg.game();
        let (n, z, m) = (game.n_agents(), game.n_states(), game.n_actions());
        let joint = game.joint();
        let t = game.transitions();
        let expected = game.expected_rewards();
        let kind = self.params.kind;

        // Effective chain: only row r moves, by agent j's conditional transitions.
        let d_markov_row: Vec<f64> = (0..z).map(|s2| self.trans_sa[j][[r, b, s2]]).collect();

        let mut out = vec![0.0; n * z * m];
        for i in 0..n {
            let gamma = self.params.gamma[i];
            let inv = &self.inverse[i];

            // d<R>^i_s: only state r.
            let d_reward_state_r = self.reward_fixed[i][j][[r, b]];

            // dV = (1-g) [ (M^-1)' <R> + M^-1 d<R> ],  (M^-1)' = g M^-1 e_r (d<T>_r . M^-1).
            let row_times_inv: Vec<f64> = (0..z)
                .map(|c| (0..z).map(|k| d_markov_row[k] * inv[(k, c)]).sum())
                .collect();
            let inv_times_reward: f64 = (0..z)
                .map(|c| row_times_inv[c] * self.reward_state[[i, c]])
                .sum();
            let dv: Vec<f64> = (0..z)
                .map(|s| {
                    (1.0 - gamma)
                        * (gamma * inv[(s, r)] * inv_times_reward + inv[(s, r)] * d_reward_state_r)
                })
                .collect();

            // Derivatives of agent i's conditional averages; zero when j == i.
            let mut d_reward_sa = Array2::<f64>::zeros((z, m));
            let mut d_trans_sa = Array3::<f64>::zeros((z, m, z));
            if j != i {
                for jj in 0..joint.count() {
                    let acts = joint.actions(jj);
                    if acts[j] != b {
                        continue;
                    }
                    let w = self.pair_weight(r, acts, i, j);
                    let a = acts[i];
                    d_reward_sa[[r, a]] += w * expected[[i, r, jj]];
                    for s2 in 0..z {
                        d_trans_sa[[r, a, s2]] += w * t[[r, jj, s2]];
                    }
                }
            }

            let ta = &self.trans_sa[i];
            let dq = |s: usize, a: usize| -> f64 {
                (1.0 - gamma) * d_reward_sa[[s, a]]
                    + gamma
                        * (0..z)
                            .map(|s2| d_trans_sa[[s, a, s2]] * self.v[[i, s2]] + ta[[s, a, s2]] * dv[s2])
                            .sum::<f64>()
            };

            let d_next: Vec<f64> = match kind {
                LearnerKind::Q => (0..z).map(|s2| dq(s2, self.greedy[i][s2])).collect(),
                LearnerKind::Sarsa => (0..z)
                    .map(|s2| {
                        (0..m)
                            .map(|c| {
                                let dx = if i == j && s2 == r && c == b { 1.0 } else { 0.0 };
                                dx * self.q[[i, s2, c]] + self.probs[[i, s2, c]] * dq(s2, c)
                            })
                            .sum()
                    })
                    .collect(),
                LearnerKind::ActorCritic => dv.clone(),
            };

            let rate = self.params.alpha[i] * self.params.beta[i];
            let alpha = self.params.alpha[i];
            for s in 0..z {
                let mut d_numer = vec![0.0; m];
                for (a, dn) in d_numer.iter_mut().enumerate() {
                    let d_td: f64 = (1.0 - gamma) * d_reward_sa[[s, a]]
                        + gamma
                            * (0..z)
                                .map(|s2| {
                                    d_trans_sa[[s, a, s2]] * self.next[i][s2] + ta[[s, a, s2]] * d_next[s2]
                                })
                                .sum::<f64>();
                    let own = i == j && s == r && a == b;
                    let p = self.probs[[i, s, a]];
                    let e = self.boltz[[i, s, a]];
                    *dn = if kind.has_log_term() {
                        let own_term = if own { (1.0 - alpha) * p.powf(-alpha) } else { 0.0 };
                        e * (own_term + rate * p.powf(1.0 - alpha) * d_td)
                    } else {
                        e * ((if own { 1.0 } else { 0.0 }) + rate * p * d_td)
                    };
                }
                let d_denom: f64 = d_numer.iter().sum();
                let bden = self.denom[[i, s]];
                for a in 0..m {
                    out[(i * z + s) * m + a] =
                        (d_numer[a] * bden - d_denom * self.numer[[i, s, a]]) / (bden * bden);
                }
            }
        }
        out
    }
}

/// `sum_{joint: a^j = b} prod_{k != j} X[k, s, a^k] * E[i, s, joint]`: agent
/// `i`'s expected reward with agent `j`'s action held at `b`.
fn reward_with_fixed(avg: &Averages, i: usize, j: usize) -> Array2<f64> {
    let game = avg.game();
    let joint = game.joint();
    let expected = game.expected_rewards();
    let w = avg.weights_except();
    let mut out = Array2::zeros((game.n_states(), game.n_actions()));
    for s in 0..game.n_states() {
        for jj in 0..joint.count() {
            out[[s, joint.actions(jj)[j]]] += w[[j, s, jj]] * expected[[i, s, jj]];
        }
    }
    out
}
