//! Random instances and brute-force reference implementations shared by the
//! integration tests. The oracles loop over joint actions directly and share
//! no code with the library.
#![allow(dead_code)]

use ndarray::{Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use nalgebra::DMatrix;
use tdlimit::values::state_action_values;
use tdlimit::{step, BehaviorProfile, Game, LearnerParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random game with strictly positive transitions and rewards in [-2, 3].
pub fn random_game(rng: &mut impl Rng, n: usize, z: usize, m: usize) -> Game {
    let j = m.pow(n as u32);
    let mut t = Array3::from_shape_fn((z, j, z), |_| rng.random_range(0.05..1.0));
    for s in 0..z {
        for jj in 0..j {
            let total: f64 = (0..z).map(|s2| t[[s, jj, s2]]).sum();
            for s2 in 0..z {
                t[[s, jj, s2]] /= total;
            }
        }
    }
    let r = Array4::from_shape_fn((n, z, j, z), |_| rng.random_range(-2.0..3.0));
    Game::new(n, z, m, t, r).expect("random game is valid")
}

pub fn random_interior(rng: &mut impl Rng, n: usize, z: usize, m: usize) -> BehaviorProfile {
    let mut p = Array3::from_shape_fn((n, z, m), |_| rng.random_range(0.05..1.0));
    for i in 0..n {
        for s in 0..z {
            let total: f64 = (0..m).map(|a| p[[i, s, a]]).sum();
            for a in 0..m {
                p[[i, s, a]] /= total;
            }
        }
    }
    BehaviorProfile::new(p).expect("random profile is valid")
}

/// Decodes joint action `j` with agent 0 as the most significant digit.
pub fn decode(mut j: usize, n: usize, m: usize) -> Vec<usize> {
    let mut acts = vec![0; n];
    for k in (0..n).rev() {
        acts[k] = j % m;
        j /= m;
    }
    acts
}

/// Probability of joint action `acts` in state `s`, skipping agent `skip`.
fn weight(x: &BehaviorProfile, s: usize, acts: &[usize], skip: Option<usize>) -> f64 {
    (0..acts.len())
        .filter(|&k| Some(k) != skip)
        .map(|k| x.get(k, s, acts[k]))
        .product()
}

pub struct Oracle {
    /// `<T>_{ss'}`.
    pub t: Array2<f64>,
    /// `<R>^i_s`.
    pub r: Array2<f64>,
    /// `<R>^i_{sa}`.
    pub r_sa: Array3<f64>,
    /// `<T>^{i,a}_{ss'}` as `[i][s, a, s']`.
    pub t_sa: Vec<Array3<f64>>,
}

pub fn oracle(game: &Game, x: &BehaviorProfile) -> Oracle {
    let (n, z, m) = (game.n_agents(), game.n_states(), game.n_actions());
    let j = m.pow(n as u32);
    let (tt, rr) = (game.transitions(), game.rewards());
    let mut t = Array2::zeros((z, z));
    let mut r = Array2::zeros((n, z));
    let mut r_sa = Array3::zeros((n, z, m));
    let mut t_sa = vec![Array3::zeros((z, m, z)); n];
    for s in 0..z {
        for jj in 0..j {
            let acts = decode(jj, n, m);
            let w = weight(x, s, &acts, None);
            for s2 in 0..z {
                t[[s, s2]] += w * tt[[s, jj, s2]];
                for i in 0..n {
                    let wi = weight(x, s, &acts, Some(i));
                    r[[i, s]] += w * tt[[s, jj, s2]] * rr[[i, s, jj, s2]];
                    r_sa[[i, s, acts[i]]] += wi * tt[[s, jj, s2]] * rr[[i, s, jj, s2]];
                    t_sa[i][[s, acts[i], s2]] += wi * tt[[s, jj, s2]];
                }
            }
        }
    }
    Oracle { t, r, r_sa, t_sa }
}

/// Solves `(I - gamma T) v = (1 - gamma) r` by Gaussian elimination with
/// partial pivoting.
pub fn solve_values(t: &Array2<f64>, r: &[f64], gamma: f64) -> Vec<f64> {
    let z = r.len();
    let mut a: Vec<Vec<f64>> = (0..z)
        .map(|s| {
            let mut row: Vec<f64> = (0..z)
                .map(|c| if s == c { 1.0 } else { 0.0 } - gamma * t[[s, c]])
                .collect();
            row.push((1.0 - gamma) * r[s]);
            row
        })
        .collect();
    for col in 0..z {
        let piv = (col..z)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for row in 0..z {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..=z {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..z).map(|s| a[s][z] / a[s][s]).collect()
}

/// Stationary distribution by repeated squaring of the lazy chain.
pub fn stationary_by_powers(t: &Array2<f64>) -> Vec<f64> {
    let z = t.nrows();
    let mut p = (t + &Array2::<f64>::eye(z)) * 0.5;
    for _ in 0..60 {
        p = p.dot(&p);
        // Squaring doubles any row-sum drift; keep the rows stochastic.
        for mut row in p.rows_mut() {
            let total = row.sum();
            row /= total;
        }
    }
    p.row(0).to_vec()
}

/// Next-state estimate per agent and state for a learner kind, from exact
/// values computed by the oracle.
pub fn next_estimate(kind: tdlimit::LearnerKind, o: &Oracle, x: &BehaviorProfile, gamma: f64, i: usize) -> Vec<f64> {
    let z = o.t.nrows();
    let m = o.r_sa.dim().2;
    let v = solve_values(&o.t, &o.r.row(i).to_vec(), gamma);
    let q = |s: usize, a: usize| {
        (1.0 - gamma) * o.r_sa[[i, s, a]] + gamma * (0..z).map(|s2| o.t_sa[i][[s, a, s2]] * v[s2]).sum::<f64>()
    };
    (0..z)
        .map(|s| match kind {
            tdlimit::LearnerKind::Q => (0..m).map(|a| q(s, a)).fold(f64::NEG_INFINITY, f64::max),
            tdlimit::LearnerKind::Sarsa => (0..m).map(|a| x.get(i, s, a) * q(s, a)).sum(),
            tdlimit::LearnerKind::ActorCritic => v[s],
        })
        .collect()
}

/// The learning map evaluated from scratch with the oracle quantities.
pub fn oracle_step(game: &Game, x: &BehaviorProfile, params: &LearnerParams) -> Array3<f64> {
    let o = oracle(game, x);
    let (n, z, m) = x.dims();
    let mut out = Array3::zeros((n, z, m));
    for i in 0..n {
        let g = params.gamma[i];
        let next = next_estimate(params.kind, &o, x, g, i);
        for s in 0..z {
            let td: Vec<f64> = (0..m)
                .map(|a| {
                    let mut v = (1.0 - g) * o.r_sa[[i, s, a]]
                        + g * (0..z).map(|s2| o.t_sa[i][[s, a, s2]] * next[s2]).sum::<f64>();
                    if params.kind != tdlimit::LearnerKind::ActorCritic {
                        v -= x.get(i, s, a).ln() / params.beta[i];
                    }
                    v
                })
                .collect();
            let w: Vec<f64> = (0..m)
                .map(|a| x.get(i, s, a) * (params.alpha[i] * params.beta[i] * td[a]).exp())
                .collect();
            let total: f64 = w.iter().sum();
            for a in 0..m {
                out[[i, s, a]] = w[a] / total;
            }
        }
    }
    out
}

const H: f64 = 1e-6;

/// Central differences of the map along `+h` on `(j, r, b)` and `-h` on every
/// other action of that row.
pub fn finite_difference(game: &Game, x: &BehaviorProfile, p: &LearnerParams) -> DMatrix<f64> {
    let (n, z, m) = x.dims();
    let dim = n * z * m;
    let mut out = DMatrix::zeros(dim, dim);
    for j in 0..n {
        for r in 0..z {
            for b in 0..m {
                let shift = |sign: f64| {
                    let mut probs = x.probs().clone();
                    for c in 0..m {
                        probs[[j, r, c]] += sign * if c == b { H } else { -H };
                    }
                    step(game, &BehaviorProfile::new(probs).unwrap(), p).unwrap().to_flat()
                };
                let (plus, minus) = (shift(1.0), shift(-1.0));
                let col = (j * z + r) * m + b;
                for row in 0..dim {
                    out[(row, col)] = (plus[row] - minus[row]) / (2.0 * H);
                }
            }
        }
    }
    out
}

/// Same along the simplex directions `e_b - e_{M-1}` of the reduced chart.
pub fn finite_difference_reduced(game: &Game, x: &BehaviorProfile, p: &LearnerParams) -> DMatrix<f64> {
    let (n, z, m) = x.dims();
    let k = m - 1;
    let dim = n * z * k;
    let mut out = DMatrix::zeros(dim, dim);
    for j in 0..n {
        for r in 0..z {
            for b in 0..k {
                let shift = |sign: f64| {
                    let mut probs = x.probs().clone();
                    probs[[j, r, b]] += sign * H;
                    probs[[j, r, k]] -= sign * H;
                    step(game, &BehaviorProfile::new(probs).unwrap(), p).unwrap().to_flat()
                };
                let (plus, minus) = (shift(1.0), shift(-1.0));
                let col = (j * z + r) * k + b;
                for i in 0..n {
                    for s in 0..z {
                        for a in 0..k {
                            let full = (i * z + s) * m + a;
                            out[((i * z + s) * k + a, col)] = (plus[full] - minus[full]) / (2.0 * H);
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn relative_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    (analytic - numeric).amax() / analytic.amax().max(1e-12)
}

/// Smallest gap between the best and second-best Q value; a kink of the Q
/// learner's map lies wherever this vanishes.
pub fn greedy_gap(game: &Game, x: &BehaviorProfile, gamma: f64) -> f64 {
    let q = state_action_values(game, x, &vec![gamma; game.n_agents()]).unwrap();
    let (n, z, m) = x.dims();
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for s in 0..z {
            let mut row: Vec<f64> = (0..m).map(|a| q[[i, s, a]]).collect();
            row.sort_by(|a, b| b.total_cmp(a));
            if m > 1 {
                gap = gap.min(row[0] - row[1]);
            }
        }
    }
    gap
}
