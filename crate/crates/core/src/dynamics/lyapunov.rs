use nalgebra::DMatrix;

use super::jacobian::jacobian;
use crate::error::{Error, Result};
use crate::game::{BehaviorProfile, Game};
use crate::learners::{step, LearnerParams};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Lyapunov exponents in descending order, one per coordinate of the
    /// reduced simplex chart (`N * Z * (M - 1)`).
    pub exponents: Vec<f64>,
    pub steps_used: usize,
    pub transient_skipped: usize,
    /// Steps at which a greedy argmax was tied and a one-sided derivative used.
    pub nondifferentiable_steps: usize,
}

impl SpectrumResult {
    pub fn max(&self) -> Option<f64> {
        self.exponents.first().copied()
    }
}

/// Profiles visited after a transient, with the spectrum accumulated along them.
pub(crate) struct Window {
    pub points: Vec<BehaviorProfile>,
    pub spectrum: SpectrumResult,
}

/// Iterates `transient` steps from `x0`, then records `record` profiles
/// `x_T, ..., x_{T+record-1}` and accumulates the Jacobian products along
/// them with a QR re-orthonormalisation at every step.
pub(crate) fn window(
    game: &Game,
    x0: &BehaviorProfile,
    params: &LearnerParams,
    transient: usize,
    record: usize,
) -> Result<Window> {
    params.validate()?;
    game.check_profile(x0)?;
    let mut x = x0.clone();
    for t in 1..=transient {
        x = step(game, &x, params).map_err(|e| Error::AtStep {
            step: t,
            source: Box::new(e),
        })?;
    }

    let partial = |completed: usize| move |e: Error| Error::Partial {
        completed,
        source: Box::new(e),
    };
    let (n, z, m) = x.dims();
    let dim = n * z * (m - 1);
    let mut basis = DMatrix::<f64>::identity(dim, dim);
    let mut sums = vec![0.0; dim];
    let mut points = Vec::with_capacity(record);
    let mut ties = 0;
    for t in 0..record {
        let jac = jacobian(game, &x, params).map_err(partial(t))?;
        ties += usize::from(jac.nondifferentiable);
        let qr = (jac.reduced() * &basis).qr();
        let (mut q, mut r) = qr.unpack();
        for k in 0..dim {
            if r[(k, k)] < 0.0 {
                q.column_mut(k).neg_mut();
                r.row_mut(k).neg_mut();
            }
            sums[k] += r[(k, k)].abs().max(f64::MIN_POSITIVE).ln();
        }
        basis = q;
        let next = step(game, &x, params).map_err(partial(t))?;
        points.push(std::mem::replace(&mut x, next));
    }

    let mut exponents: Vec<f64> = sums.iter().map(|s| s / record.max(1) as f64).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    if record == 0 {
        exponents.clear();
    }
    Ok(Window {
        points,
        spectrum: SpectrumResult {
            exponents,
            steps_used: record,
            transient_skipped: transient,
            nondifferentiable_steps: ties,
        },
    })
}

/// Lyapunov spectrum of the learning map along the orbit of `x0`, averaged
/// over `steps` steps after discarding `transient` steps.
pub fn lyapunov_spectrum(
    game: &Game,
    x0: &BehaviorProfile,
    params: &LearnerParams,
    steps: usize,
    transient: usize,
) -> Result<SpectrumResult> {
    if steps == 0 {
        return Err(Error::Parameter("Lyapunov spectrum needs at least one step".into()));
    }
    window(game, x0, params, transient, steps).map(|w| w.spectrum)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(matrix: &DMatrix<f64>) -> f64 {
    if matrix.is_empty() {
        return 0.0;
    }
    matrix
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}
