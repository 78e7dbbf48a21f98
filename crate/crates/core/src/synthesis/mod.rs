//! Closed-form optimal static state feedback.
//!
//! For `x' = a x + b u + w` with `a` symmetric and Hurwitz and performance
//! output `(x, u)`, the gain `l = b^T a^{-1}` minimizes the H-infinity norm
//! from `w` to `(x, u)`, and the minimum is `1 / sqrt(lambda_min(a^2 + b b^T))`.
//! With weighted outputs `(C x, D u)` the optimal gain becomes
//! `r^{-1} b^T q a^{-1}` whenever `-a q^{-1}` is symmetric positive definite.

mod coordinated;

pub use coordinated::{
    expand_reduced_gain, reduce_coordination, synth_coordinated, CoordinatedGain, CoordinatedPlant,
    ReducedCoordination,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CostWeights, GainMatrix, LtiSystem};

pub const DEFAULT_COND_LIMIT: f64 = 1e12;

fn check_conditioning(sys: &LtiSystem, cond_limit: f64) -> Result<()> {
    // a is symmetric, so its 2-norm condition is a ratio of |eigenvalues|
    let ev = linalg::sym_eigenvalues(sys.a());
    let max = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let cond = if min == 0.0 { f64::INFINITY } else { max / min };
    if cond > cond_limit {
        return Err(Error::SingularStateMatrix {
            cond,
            limit: cond_limit,
        });
    }
    Ok(())
}

/// `l = b^T a^{-1}`, computed as the transpose of the solution of `a^T z = b`.
pub fn synth_optimal(sys: &LtiSystem) -> Result<GainMatrix> {
    synth_optimal_with(sys, DEFAULT_COND_LIMIT)
}

pub fn synth_optimal_with(sys: &LtiSystem, cond_limit: f64) -> Result<GainMatrix> {
    check_conditioning(sys, cond_limit)?;
    let z = linalg::solve(&sys.a().transpose(), sys.b())?;
    Ok(GainMatrix::new(z.transpose()))
}

/// Optimal closed-loop norm `sqrt(||(a^2 + b b^T)^{-1}||)`, evaluated as
/// `1 / sqrt(lambda_min(a^2 + b b^T))`.
pub fn optimal_gamma(sys: &LtiSystem) -> f64 {
    let lambda_min = linalg::sym_eigenvalues(&optimality_matrix(sys))[0];
    1.0 / lambda_min.sqrt()
}

/// Relative accuracy of [`optimal_gamma`]: a backward-stable symmetric
/// eigensolver perturbs `lambda_min` by at most about `n eps ||m||`, and
/// `gamma = lambda^{-1/2}` halves the relative error.
pub fn optimal_gamma_rel_error(sys: &LtiSystem) -> f64 {
    let ev = linalg::sym_eigenvalues(&optimality_matrix(sys));
    let top = ev.last().copied().unwrap_or(0.0);
    0.5 * (sys.n() as f64 + 1.0) * f64::EPSILON * top / ev[0]
}

/// `a^2 + b b^T`, symmetric positive definite for every valid plant.
pub fn optimality_matrix(sys: &LtiSystem) -> DMatrix<f64> {
    let a = sys.a();
    let b = sys.b();
    linalg::symmetrize(&(a * a + b * b.transpose()))
}

/// Smallest eigenvalue of `-a^2 - b b^T + gamma^{-2} I`; negative exactly
/// when `gamma` exceeds the optimal norm.
pub fn optimality_margin(sys: &LtiSystem, gamma: f64) -> f64 {
    let n = sys.n();
    let m = -optimality_matrix(sys) + DMatrix::identity(n, n) / (gamma * gamma);
    *linalg::sym_eigenvalues(&m).last().expect("n >= 1")
}

/// `l = r^{-1} b^T q a^{-1}` for admissible weights.
///
/// With `q = I` and `r = I` this performs the same operations as
/// [`synth_optimal`] and returns the same values.
pub fn synth_weighted(sys: &LtiSystem, w: &CostWeights, pd_tol: f64) -> Result<GainMatrix> {
    synth_weighted_with(sys, w, pd_tol, DEFAULT_COND_LIMIT)
}

pub fn synth_weighted_with(
    sys: &LtiSystem,
    w: &CostWeights,
    pd_tol: f64,
    cond_limit: f64,
) -> Result<GainMatrix> {
    if w.r().nrows() != sys.m() {
        return Err(Error::DimensionMismatch(format!(
            "r is {}x{}, plant has {} inputs",
            w.r().nrows(),
            w.r().ncols(),
            sys.m()
        )));
    }
    w.admissible(sys.a(), sys.sym_tol(), pd_tol)?;
    check_conditioning(sys, cond_limit)?;
    // (b^T q a^{-1})^T = a^{-T} q^T b
    let z = linalg::solve(&sys.a().transpose(), &(w.q().transpose() * sys.b()))?;
    let l = linalg::solve(w.r(), &z.transpose())?;
    Ok(GainMatrix::new(l))
}
