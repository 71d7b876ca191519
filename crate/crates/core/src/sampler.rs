//! Monte-Carlo batches under a frozen behavior profile.
//!
//! Agents interact `K` times without adapting. For every visit of `(s, a)`
//! the sample target `(1 - gamma) r + gamma * W(s')` is recorded, where `W` is
//! the exact next-state estimate of the frozen profile. The per-pair sample
//! averages converge to the deterministic truncated TD error.

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{BehaviorProfile, Game};
use crate::learners::{next_state_estimate, truncated_td, LearnerParams};
use crate::values::{stationary_distribution, Averages};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchEstimate {
    /// Per-pair sample averages, `[N, Z, M]`; zero where `visited` is false.
    pub sampled_td: Array3<f64>,
    /// Standard error of each average; NaN with fewer than two visits.
    pub std_error: Array3<f64>,
    pub visits: Array3<u64>,
    pub visited: Array3<bool>,
    pub state_visits: Array1<u64>,
    pub batch_size: usize,
    pub seed: u64,
}

impl BatchEstimate {
    /// Empirical state-visit frequencies.
    pub fn state_frequencies(&self) -> Array1<f64> {
        self.state_visits.mapv(|c| c as f64 / self.batch_size as f64)
    }

    /// Largest deviation from `reference` over visited pairs.
    pub fn max_deviation(&self, reference: &Array3<f64>) -> f64 {
        self.sampled_td
            .indexed_iter()
            .filter(|(idx, _)| self.visited[*idx])
            .fold(0.0, |m, (idx, v)| m.max((v - reference[idx]).abs()))
    }
}

/// Index drawn from the discrete distribution `weights` with a uniform `u`.
fn draw<'a>(weights: impl IntoIterator<Item = &'a f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            last = k;
            acc += w;
            if u < acc {
                return k;
            }
        }
    }
    last
}

pub fn sample_batch_td(
    game: &Game,
    x: &BehaviorProfile,
    params: &LearnerParams,
    k: usize,
    seed: u64,
) -> Result<BatchEstimate> {
    if k == 0 {
        return Err(Error::Parameter("batch size must be at least 1".into()));
    }
    params.validate()?;
    let (n, z, m) = (game.n_agents(), game.n_states(), game.n_actions());
    if params.n_agents() != n {
        return Err(Error::Dimension(format!(
            "parameters for {} agents, game has {n}",
            params.n_agents()
        )));
    }
    let avg = Averages::new(game, x)?;
    let values = avg.values(&params.gamma)?;
    let next: Array2<f64> = Array2::from_shape_fn((n, z), |(i, s)| {
        next_state_estimate(params.kind, &values, x, i)[s]
    });
    let sigma = stationary_distribution(&avg.effective_transitions())?;

    let probs = x.probs();
    let t = game.transitions();
    let r = game.rewards();
    let joint = game.joint();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut sum = Array3::<f64>::zeros((n, z, m));
    let mut sum_sq = Array3::<f64>::zeros((n, z, m));
    let mut visits = Array3::<u64>::zeros((n, z, m));
    let mut state_visits = Array1::<u64>::zeros(z);
    let mut actions = vec![0; n];
    let mut s = draw(sigma.iter(), rng.random());
    for _ in 0..k {
        state_visits[s] += 1;
        for (i, a) in actions.iter_mut().enumerate() {
            *a = draw(probs.slice(ndarray::s![i, s, ..]), rng.random());
        }
        let j = joint.index(&actions);
        let s2 = draw(t.slice(ndarray::s![s, j, ..]), rng.random());
        for (i, &a) in actions.iter().enumerate() {
            let gamma = params.gamma[i];
            let target = (1.0 - gamma) * r[[i, s, j, s2]] + gamma * next[[i, s2]];
            sum[[i, s, a]] += target;
            sum_sq[[i, s, a]] += target * target;
            visits[[i, s, a]] += 1;
        }
        s = s2;
    }

    let visited = visits.mapv(|c| c > 0);
    let mut sampled_td = Array3::zeros((n, z, m));
    let mut std_error = Array3::from_elem((n, z, m), f64::NAN);
    for (idx, &c) in visits.indexed_iter() {
        if c == 0 {
            continue;
        }
        let c = c as f64;
        let mean = sum[idx] / c;
        sampled_td[idx] = mean;
        if c > 1.0 {
            let var = ((sum_sq[idx] - c * mean * mean) / (c - 1.0)).max(0.0);
            std_error[idx] = (var / c).sqrt();
        }
    }
    Ok(BatchEstimate {
        sampled_td,
        std_error,
        visits,
        visited,
        state_visits,
        batch_size: k,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub k: usize,
    /// Max-abs deviation from the deterministic TD, averaged over seeds.
    pub max_deviation: f64,
    /// Total-variation distance of the state-visit frequencies to the
    /// stationary distribution, averaged over seeds.
    pub tv_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    /// Least-squares slope of `ln(max_deviation)` against `ln(k)`.
    pub slope: f64,
    pub seed: u64,
    pub n_seeds: usize,
}

/// Runs `n_seeds` batches per batch size (seeds `seed, seed + 1, ...`) and
/// compares them with the deterministic truncated TD error.
pub fn validate_conversion(
    game: &Game,
    x: &BehaviorProfile,
    params: &LearnerParams,
    ks: &[usize],
    seed: u64,
    n_seeds: usize,
) -> Result<ValidationReport> {
    if ks.len() < 2 {
        return Err(Error::Parameter("need at least two batch sizes to fit a slope".into()));
    }
    if n_seeds == 0 {
        return Err(Error::Parameter("need at least one seed".into()));
    }
    let reference = truncated_td(game, x, params)?;
    let sigma = stationary_distribution(&Averages::new(game, x)?.effective_transitions())?;

    let rows = ks
        .iter()
        .map(|&k| {
            let runs = (0..n_seeds as u64)
                .into_par_iter()
                .map(|r| {
                    let est = sample_batch_td(game, x, params, k, seed.wrapping_add(r))?;
                    let tv = 0.5
                        * est
                            .state_frequencies()
                            .iter()
                            .zip(sigma.iter())
                            .map(|(f, p)| (f - p).abs())
                            .sum::<f64>();
                    Ok((est.max_deviation(&reference), tv))
                })
                .collect::<Result<Vec<_>>>()?;
            let count = runs.len() as f64;
            Ok(ValidationRow {
                k,
                max_deviation: runs.iter().map(|r| r.0).sum::<f64>() / count,
                tv_distance: runs.iter().map(|r| r.1).sum::<f64>() / count,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.k as f64).ln(), r.max_deviation.ln()))
        .collect();
    Ok(ValidationReport {
        slope: fit_slope(&pts),
        rows,
        seed,
        n_seeds,
    })
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    cov / var
}
