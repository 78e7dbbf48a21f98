//! Gamma-iteration over the state-feedback H-infinity Riccati equation.
//!
//! Convention: for `x' = a x + b u + w` with performance output `(x, u)`,
//!
//! ```text
//! a^T X + X a + X (gamma^-2 I - b b^T) X + I = 0,     l_G = -b^T X
//! ```
//!
//! A stabilizing `X >= 0` exists exactly when some controller achieves a
//! closed-loop norm below `gamma`. The solution is read off the stable
//! invariant subspace of the Hamiltonian
//! `[[a, gamma^-2 I - b b^T], [-I, -a^T]]` via an ordered real Schur form.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::hinfnorm::{self, NormOptions};
use crate::linalg::{self, RealSchur};
use crate::model::{GainMatrix, LtiSystem};
use crate::synthesis::optimal_gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CareOptions {
    /// Eigenvalues with `|re| <= imag_tol * ||H||` count as imaginary.
    pub imag_tol: f64,
    pub subspace_cond_limit: f64,
    /// Residual bound is `care_tol * (1 + ||X||_F^2)`.
    pub care_tol: f64,
    pub pd_tol: f64,
}

impl Default for CareOptions {
    fn default() -> Self {
        CareOptions {
            imag_tol: 1e-8,
            subspace_cond_limit: 1e10,
            care_tol: 1e-8,
            pd_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CareSolution {
    pub gamma: f64,
    /// Symmetric stabilizing solution.
    pub x: DMatrix<f64>,
    /// Frobenius norm of the equation residual.
    pub residual: f64,
    /// Eigenvalues of `a - b b^T X`, the loop closed by `l_G`.
    pub closed_loop_spectrum: Vec<Complex<f64>>,
    pub subspace_cond: f64,
}

impl CareSolution {
    pub fn gain(&self, sys: &LtiSystem) -> GainMatrix {
        GainMatrix::new(-sys.b().transpose() * &self.x)
    }
}

pub(crate) enum SubspaceFailure {
    AxisEigenvalues(f64),
    WrongDimension(usize),
    IllConditioned(f64),
    Numeric(Error),
}

/// `X = U2 U1^{-1}` from the stable invariant subspace `[U1; U2]` of a
/// `2n x 2n` Hamiltonian. Returns `X` (symmetrized) and `cond(U1)`.
pub(crate) fn stable_subspace_solution(
    h: &DMatrix<f64>,
    imag_tol: f64,
    cond_limit: f64,
) -> std::result::Result<(DMatrix<f64>, f64), SubspaceFailure> {
    let n = h.nrows() / 2;
    let scale = linalg::inf_norm(h).max(f64::MIN_POSITIVE);
    let mut schur = RealSchur::new(h).map_err(SubspaceFailure::Numeric)?;
    let closest = schur
        .eigenvalues()
        .iter()
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min);
    if closest <= imag_tol * scale {
        return Err(SubspaceFailure::AxisEigenvalues(closest));
    }
    let k = schur
        .reorder(|z| z.re < 0.0)
        .map_err(SubspaceFailure::Numeric)?;
    if k != n {
        return Err(SubspaceFailure::WrongDimension(k));
    }
    let u1 = schur.z.view((0, 0), (n, n)).into_owned();
    let u2 = schur.z.view((n, 0), (n, n)).into_owned();
    let cond = linalg::condition_number(&u1);
    if cond.is_nan() || cond > cond_limit {
        return Err(SubspaceFailure::IllConditioned(cond));
    }
    // X u1 = u2  <=>  u1^T X^T = u2^T
    let xt = linalg::solve(&u1.transpose(), &u2.transpose()).map_err(SubspaceFailure::Numeric)?;
    Ok((linalg::symmetrize(&xt.transpose()), cond))
}

pub fn hinf_hamiltonian(sys: &LtiSystem, gamma: f64) -> DMatrix<f64> {
    let n = sys.n();
    let a = sys.a();
    let b = sys.b();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n))
        .copy_from(&(&eye / (gamma * gamma) - b * b.transpose()));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&eye));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    h
}

pub fn care_residual(sys: &LtiSystem, gamma: f64, x: &DMatrix<f64>) -> f64 {
    let n = sys.n();
    let a = sys.a();
    let b = sys.b();
    let eye = DMatrix::<f64>::identity(n, n);
    let s = &eye / (gamma * gamma) - b * b.transpose();
    (a.transpose() * x + x * a + x * s * x + eye).norm()
}

pub fn solve_hinf_care(sys: &LtiSystem, gamma: f64) -> Result<CareSolution> {
    solve_hinf_care_with(sys, gamma, &CareOptions::default())
}

pub fn solve_hinf_care_with(
    sys: &LtiSystem,
    gamma: f64,
    opts: &CareOptions,
) -> Result<CareSolution> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let h = hinf_hamiltonian(sys, gamma);
    let no_solution = |reason: String| Error::NoStabilizingSolution { gamma, reason };
    let (x, cond) = match stable_subspace_solution(&h, opts.imag_tol, opts.subspace_cond_limit) {
        Ok(v) => v,
        Err(SubspaceFailure::AxisEigenvalues(d)) => {
            return Err(no_solution(format!(
                "Hamiltonian has eigenvalues on the imaginary axis (|re| = {d:e})"
            )))
        }
        Err(SubspaceFailure::WrongDimension(k)) => {
            return Err(no_solution(format!(
                "stable subspace has dimension {k}, expected {}",
                sys.n()
            )))
        }
        Err(SubspaceFailure::IllConditioned(c)) => {
            return Err(Error::IllConditionedSubspace {
                cond: c,
                limit: opts.subspace_cond_limit,
            })
        }
        Err(SubspaceFailure::Numeric(e)) => return Err(e),
    };

    let x_norm = x.norm();
    let min_eig = linalg::sym_eigenvalues(&x)[0];
    if min_eig < -opts.pd_tol * x_norm.max(1.0) {
        return Err(no_solution(format!(
            "solution is not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    let residual = care_residual(sys, gamma, &x);
    let bound = opts.care_tol * (1.0 + x_norm * x_norm);
    if residual > bound {
        return Err(Error::ResidualTooLarge { residual, bound });
    }
    let a_cl = sys.a() - sys.b() * sys.b().transpose() * &x;
    let closed_loop_spectrum = linalg::eigenvalues(&a_cl)?;
    Ok(CareSolution {
        gamma,
        x,
        residual,
        closed_loop_spectrum,
        subspace_cond: cond,
    })
}

/// Result of the gamma iteration.
#[derive(Debug, Clone)]
pub struct AreSynthesis {
    /// `l_G = -b^T X` at `achieved_gamma`.
    pub gain: GainMatrix,
    /// Level at which the reported controller was computed, slightly above
    /// the estimated infimum.
    pub achieved_gamma: f64,
    /// Smallest level found feasible by the bisection.
    pub infimum_upper: f64,
    /// Largest level found infeasible.
    pub infimum_lower: f64,
    pub iterations: usize,
    pub care: CareSolution,
}

fn feasible(sys: &LtiSystem, gamma: f64, opts: &CareOptions) -> Result<bool> {
    match solve_hinf_care_with(sys, gamma, opts) {
        Ok(_) => Ok(true),
        Err(Error::NoStabilizingSolution { .. }) | Err(Error::IllConditionedSubspace { .. }) => {
            Ok(false)
        }
        Err(e) => Err(e),
    }
}

pub fn synth_are(sys: &LtiSystem, gamma_tol: f64) -> Result<AreSynthesis> {
    synth_are_with(sys, gamma_tol, 200, &CareOptions::default())
}

/// Bisect `gamma` down to the infimum of achievable levels, then return the
/// central controller at `infimum * (1 + 10 gamma_tol)`.
///
/// The bracket starts at `[0.999 gamma_opt, 1.001 gamma_0]` where
/// `gamma_opt` is the closed-form optimum and `gamma_0` the open-loop norm
/// (the level reached by `l = 0`).
pub fn synth_are_with(
    sys: &LtiSystem,
    gamma_tol: f64,
    max_iter: usize,
    opts: &CareOptions,
) -> Result<AreSynthesis> {
    if gamma_tol.is_nan() || gamma_tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gamma_tol must be positive, got {gamma_tol}"
        )));
    }
    let open_loop = hinfnorm::closed_loop(sys, &GainMatrix::zeros(sys.m(), sys.n()))?;
    let gamma0 = hinfnorm::hinf_norm_bisect(&open_loop, &NormOptions::default())?.upper;

    let mut lo = optimal_gamma(sys) * (1.0 - 1e-3);
    let mut tries = 0;
    while feasible(sys, lo, opts)? {
        lo *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::NoConvergence {
                iterations: tries,
                context: "no infeasible lower gamma found".into(),
            });
        }
    }
    let mut hi = gamma0 * (1.0 + 1e-3);
    tries = 0;
    while !feasible(sys, hi, opts)? {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::NoConvergence {
                iterations: tries,
                context: "no feasible upper gamma found".into(),
            });
        }
    }
    let top = hi;

    let mut iterations = 0;
    while hi - lo > gamma_tol * hi {
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                context: format!("gamma bracket [{lo}, {hi}]"),
            });
        }
        let mid = 0.5 * (lo + hi);
        if feasible(sys, mid, opts)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // feasibility must persist above the infimum
    let probe = 0.5 * (hi + top);
    if !feasible(sys, probe, opts)? {
        return Err(Error::NonMonotoneFeasibility(format!(
            "gamma = {hi} feasible but {probe} is not"
        )));
    }
    let achieved_gamma = hi * (1.0 + 10.0 * gamma_tol);
    let care = solve_hinf_care_with(sys, achieved_gamma, opts).map_err(|e| {
        Error::NonMonotoneFeasibility(format!(
            "gamma = {hi} feasible but {achieved_gamma} is not: {e}"
        ))
    })?;
    Ok(AreSynthesis {
        gain: care.gain(sys),
        achieved_gamma,
        infimum_upper: hi,
        infimum_lower: lo,
        iterations,
        care,
    })
}
