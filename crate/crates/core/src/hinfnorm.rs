//! H-infinity norm oracles independent of the closed-form synthesis:
//! Hamiltonian bisection and a frequency sweep.
//!
//! For a stable realization `(a, b, c, d)` and `gamma > sigma_max(d)`, the
//! norm is at least `gamma` exactly when
//!
//! ```text
//! H = [[a + b R^-1 d^T c,        b R^-1 b^T           ],
//!      [-c^T (I + d R^-1 d^T) c, -(a + b R^-1 d^T c)^T]],   R = gamma^2 I - d^T d
//! ```
//!
//! has an eigenvalue on the imaginary axis; its imaginary part is a frequency
//! where `sigma_max(G(i w)) = gamma`.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{GainMatrix, LtiSystem, StateSpace};
use crate::riccati::{stable_subspace_solution, SubspaceFailure};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOptions {
    /// Stop once `upper - lower <= bisect_tol * max(1, lower)`.
    pub bisect_tol: f64,
    /// Eigenvalues with `|re| <= imag_tol * ||H||` lie on the axis.
    pub imag_tol: f64,
    pub max_iter: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            bisect_tol: 1e-6,
            imag_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormResult {
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
    /// Frequency (rad/time) where the peak gain was observed.
    pub peak_frequency: f64,
    pub iterations: usize,
    pub bisect_tol: f64,
    pub imag_tol: f64,
}

/// Closed loop of `x' = a x + b u + w` under `u = l x`, from `w` to `(x, u)`:
/// `(a + b l, I, [I; l], 0)`.
pub fn closed_loop(sys: &LtiSystem, l: &GainMatrix) -> Result<StateSpace> {
    l.check_dims(sys)?;
    let n = sys.n();
    let m = sys.m();
    let a_cl = sys.a() + sys.b() * &l.l;
    let max_real = linalg::max_real_part(&a_cl)?;
    if max_real.is_nan() || max_real >= 0.0 {
        return Err(Error::UnstableClosedLoop { max_real });
    }
    let mut c = DMatrix::zeros(n + m, n);
    c.view_mut((0, 0), (n, n)).fill_with_identity();
    c.view_mut((n, 0), (m, n)).copy_from(&l.l);
    StateSpace::new(a_cl, DMatrix::identity(n, n), c, DMatrix::zeros(n + m, n))
}

fn ensure_stable(ss: &StateSpace) -> Result<()> {
    if ss.states() == 0 {
        return Ok(());
    }
    let max_real = linalg::max_real_part(&ss.a)?;
    if max_real.is_nan() || max_real >= 0.0 {
        return Err(Error::NotStable { max_real });
    }
    Ok(())
}

/// `c (i w I - a)^{-1} b + d`.
pub fn frequency_response(ss: &StateSpace, omega: f64) -> Result<DMatrix<Complex<f64>>> {
    let n = ss.states();
    let d = ss.d.map(|v| Complex::new(v, 0.0));
    if n == 0 {
        return Ok(d);
    }
    let mut resolvent = ss.a.map(|v| Complex::new(-v, 0.0));
    for i in 0..n {
        resolvent[(i, i)] += Complex::new(0.0, omega);
    }
    let b = ss.b.map(|v| Complex::new(v, 0.0));
    let x = resolvent
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NonFiniteResult(format!("resolvent at w = {omega}")))?;
    let c = ss.c.map(|v| Complex::new(v, 0.0));
    Ok(c * x + d)
}

pub fn sigma_max_at(ss: &StateSpace, omega: f64) -> Result<f64> {
    Ok(linalg::spectral_norm_complex(&frequency_response(
        ss, omega,
    )?))
}

/// `n` logarithmically spaced frequencies in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (l0, l1) = (lo.log10(), hi.log10());
            (0..n)
                .map(|k| 10f64.powf(l0 + (l1 - l0) * k as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

/// Largest singular value over a frequency grid; a lower bound on the norm.
pub fn freq_sweep_norm(ss: &StateSpace, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("frequency grid is empty".into()));
    }
    if grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument(
            "frequency grid has non-finite entries".into(),
        ));
    }
    ensure_stable(ss)?;
    let values = grid
        .par_iter()
        .map(|&w| sigma_max_at(ss, w))
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// The Hamiltonian above, or `None` when `gamma <= sigma_max(d)`.
pub fn norm_hamiltonian(ss: &StateSpace, gamma: f64) -> Option<DMatrix<f64>> {
    let n = ss.states();
    let p = ss.inputs();
    let q = ss.outputs();
    let (a, b, c, d) = (&ss.a, &ss.b, &ss.c, &ss.d);
    let r = DMatrix::identity(p, p) * (gamma * gamma) - d.transpose() * d;
    if linalg::sym_eigenvalues(&r)
        .first()
        .is_some_and(|&v| v <= 0.0)
    {
        return None;
    }
    let r_inv = r.clone().cholesky()?.inverse();
    let a_h = a + b * &r_inv * d.transpose() * c;
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n))
        .copy_from(&(b * &r_inv * b.transpose()));
    let s = DMatrix::identity(q, q) + d * &r_inv * d.transpose();
    h.view_mut((n, 0), (n, n))
        .copy_from(&(-(c.transpose() * s * c)));
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
    Some(h)
}

/// Nonnegative frequencies of Hamiltonian eigenvalues on the imaginary axis.
fn axis_frequencies(ss: &StateSpace, gamma: f64, imag_tol: f64) -> Result<Vec<f64>> {
    let Some(h) = norm_hamiltonian(ss, gamma) else {
        // gamma <= sigma_max(d): the norm is at least gamma at infinity
        return Ok(vec![f64::INFINITY]);
    };
    let scale = linalg::inf_norm(&h).max(f64::MIN_POSITIVE);
    Ok(linalg::eigenvalues(&h)?
        .into_iter()
        .filter(|z| z.re.abs() <= imag_tol * scale && z.im >= 0.0)
        .map(|z| z.im)
        .collect())
}

/// `sigma_max(d) + 2 * sum of Hankel singular values`.
fn hankel_upper_bound(ss: &StateSpace) -> Result<Option<f64>> {
    const KRONECKER_LIMIT: usize = 40;
    let n = ss.states();
    if n > KRONECKER_LIMIT {
        return Ok(None);
    }
    let ctrl = linalg::lyapunov(&ss.a, &(&ss.b * ss.b.transpose()))?;
    let obs = linalg::lyapunov(&ss.a.transpose(), &(ss.c.transpose() * &ss.c))?;
    let hsv: f64 = linalg::eigenvalues(&(ctrl * obs))?
        .iter()
        .map(|z| z.re.max(0.0).sqrt())
        .sum();
    Ok(Some(linalg::spectral_norm(&ss.d) + 2.0 * hsv))
}

pub fn hinf_norm(ss: &StateSpace) -> Result<NormResult> {
    hinf_norm_bisect(ss, &NormOptions::default())
}

/// Bisection on `gamma` with the Hamiltonian imaginary-axis test.
pub fn hinf_norm_bisect(ss: &StateSpace, opts: &NormOptions) -> Result<NormResult> {
    if opts.bisect_tol.is_nan()
        || opts.bisect_tol <= 0.0
        || opts.imag_tol.is_nan()
        || opts.imag_tol <= 0.0
    {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    ensure_stable(ss)?;
    let d_norm = linalg::spectral_norm(&ss.d);
    let n = ss.states();
    if n == 0 || ss.inputs() == 0 || ss.outputs() == 0 {
        return Ok(NormResult {
            gamma: d_norm,
            lower: d_norm,
            upper: d_norm,
            peak_frequency: f64::INFINITY,
            iterations: 0,
            bisect_tol: opts.bisect_tol,
            imag_tol: opts.imag_tol,
        });
    }

    // lower bound from d, dc gain and a coarse grid around the spectrum
    let spectrum = linalg::eigenvalues(&ss.a)?;
    let radius = spectrum
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut grid = vec![0.0];
    grid.extend(spectrum.iter().flat_map(|z| [z.norm(), z.im.abs()]));
    grid.extend(log_grid(1e-3 * radius, 1e3 * radius, 40));
    let mut lower = d_norm;
    let mut peak = f64::INFINITY;
    for &w in &grid {
        let s = sigma_max_at(ss, w)?;
        if s > lower {
            lower = s;
            peak = w;
        }
    }
    if lower == 0.0 {
        // zero transfer function
        return Ok(NormResult {
            gamma: 0.0,
            lower: 0.0,
            upper: 0.0,
            peak_frequency: 0.0,
            iterations: 0,
            bisect_tol: opts.bisect_tol,
            imag_tol: opts.imag_tol,
        });
    }

    let mut upper = match hankel_upper_bound(ss)? {
        Some(u) => u.max(lower * (1.0 + opts.bisect_tol)),
        None => 2.0 * lower,
    };
    let mut guard = 0;
    while !axis_frequencies(ss, upper, opts.imag_tol)?.is_empty() {
        upper *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::NoConvergence {
                iterations: guard,
                context: "no valid upper bound for the H-infinity norm".into(),
            });
        }
    }

    let mut iterations = 0;
    let mut last_axis: Vec<f64> = vec![];
    while upper - lower > opts.bisect_tol * lower.max(1.0) {
        iterations += 1;
        if iterations > opts.max_iter {
            return Err(Error::NoConvergence {
                iterations: opts.max_iter,
                context: format!("H-infinity bracket [{lower}, {upper}]"),
            });
        }
        let gamma = 0.5 * (lower + upper);
        let freqs = axis_frequencies(ss, gamma, opts.imag_tol)?;
        if freqs.is_empty() {
            upper = gamma;
        } else {
            lower = gamma;
            last_axis = freqs;
        }
    }

    let mut best = sigma_max_at(ss, if peak.is_finite() { peak } else { 0.0 })?;
    for &w in last_axis.iter().filter(|w| w.is_finite()) {
        let s = sigma_max_at(ss, w)?;
        if s > best {
            best = s;
            peak = w;
        }
    }

    Ok(NormResult {
        gamma: 0.5 * (lower + upper),
        lower,
        upper,
        peak_frequency: peak,
        iterations,
        bisect_tol: opts.bisect_tol,
        imag_tol: opts.imag_tol,
    })
}

/// Storage function `V(x) = x^T p x` certifying a closed-loop level `gamma`.
#[derive(Debug, Clone)]
pub struct StorageCertificate {
    pub gamma: f64,
    pub p: DMatrix<f64>,
    /// Largest eigenvalue of
    /// `[[a^T p + p a, p b, c^T], [b^T p, -gamma^2 I, 0], [c, 0, -I]]`.
    pub lmi_max_eigenvalue: f64,
    pub p_min_eigenvalue: f64,
}

impl StorageCertificate {
    /// LMI negative semidefinite within `tol` (relative to its scale) and
    /// `p` positive semidefinite.
    pub fn holds(&self, tol: f64) -> bool {
        let scale = 1.0 + self.gamma * self.gamma + self.p.norm();
        self.lmi_max_eigenvalue <= tol * scale && self.p_min_eigenvalue >= -tol * scale
    }
}

/// Build `p` from the stabilizing solution of
/// `a^T p + p a + gamma^-2 p b b^T p + c^T c = 0` and evaluate the
/// bounded-real LMI at it. Requires `d = 0` and `gamma` above the norm.
pub fn storage_certificate(
    ss: &StateSpace,
    gamma: f64,
    imag_tol: f64,
) -> Result<StorageCertificate> {
    if linalg::max_abs(&ss.d) != 0.0 {
        return Err(Error::InvalidArgument(
            "storage certificate needs d = 0".into(),
        ));
    }
    ensure_stable(ss)?;
    let h = norm_hamiltonian(ss, gamma)
        .ok_or_else(|| Error::InvalidArgument(format!("gamma = {gamma} is not positive")))?;
    let p = match stable_subspace_solution(&h, imag_tol, 1e12) {
        Ok((x, _)) => x,
        Err(SubspaceFailure::Numeric(e)) => return Err(e),
        Err(_) => {
            return Err(Error::NoStabilizingSolution {
                gamma,
                reason: "bounded-real Hamiltonian has no stable Lagrangian subspace".into(),
            })
        }
    };
    let (n, k, q) = (ss.states(), ss.inputs(), ss.outputs());
    let size = n + k + q;
    let mut lmi = DMatrix::zeros(size, size);
    lmi.view_mut((0, 0), (n, n))
        .copy_from(&(ss.a.transpose() * &p + &p * &ss.a));
    let pb = &p * &ss.b;
    lmi.view_mut((0, n), (n, k)).copy_from(&pb);
    lmi.view_mut((n, 0), (k, n)).copy_from(&pb.transpose());
    lmi.view_mut((0, n + k), (n, q))
        .copy_from(&ss.c.transpose());
    lmi.view_mut((n + k, 0), (q, n)).copy_from(&ss.c);
    lmi.view_mut((n, n), (k, k))
        .copy_from(&(DMatrix::identity(k, k) * -(gamma * gamma)));
    lmi.view_mut((n + k, n + k), (q, q))
        .copy_from(&(-DMatrix::identity(q, q)));
    let lmi_max_eigenvalue = *linalg::sym_eigenvalues(&linalg::symmetrize(&lmi))
        .last()
        .unwrap();
    let p_min_eigenvalue = linalg::sym_eigenvalues(&p)[0];
    Ok(StorageCertificate {
        gamma,
        p,
        lmi_max_eigenvalue,
        p_min_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;
    use crate::synthesis::{optimal_gamma, synth_optimal};

    fn scalar_ss() -> StateSpace {
        let one = DMatrix::from_element(1, 1, 1.0);
        StateSpace::new(-one.clone(), one.clone(), one, DMatrix::zeros(1, 1)).unwrap()
    }

    #[test]
    fn first_order_lag_has_unit_norm() {
        let r = hinf_norm(&scalar_ss()).unwrap();
        assert!((r.gamma - 1.0).abs() <= 1e-6);
        assert!(r.peak_frequency.abs() < 1e-3);
        assert_eq!(freq_sweep_norm(&scalar_ss(), &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn closed_loop_layout() {
        let sys = fixtures::buffer_network();
        let ss = closed_loop(&sys, &GainMatrix::zeros(3, 3)).unwrap();
        assert_eq!(&ss.a, sys.a());
        assert_eq!(ss.c.rows(0, 3), DMatrix::<f64>::identity(3, 3));
        assert!(ss.c.rows(3, 3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unstable_closed_loop_rejected() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let sys = LtiSystem::new(-one.clone(), one.clone()).unwrap();
        let e = closed_loop(&sys, &GainMatrix::new(one)).unwrap_err();
        assert!(matches!(e, Error::UnstableClosedLoop { .. }));
    }

    #[test]
    fn optimal_loop_norm_matches_closed_form() {
        for sys in [fixtures::buffer_network(), fixtures::buffer_chain()] {
            let ss = closed_loop(&sys, &synth_optimal(&sys).unwrap()).unwrap();
            let r = hinf_norm(&ss).unwrap();
            let g = optimal_gamma(&sys);
            assert!(
                (r.gamma - g).abs() <= 1e-6 * g.max(1.0),
                "{} vs {g}",
                r.gamma
            );
            assert!(r.lower <= r.gamma && r.gamma <= r.upper);
        }
    }

    #[test]
    fn resonant_peak_is_located() {
        // lightly damped oscillator: peak near w = 1
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let ss = StateSpace::new(a, b, c, DMatrix::zeros(1, 1)).unwrap();
        let r = hinf_norm(&ss).unwrap();
        // |G(iw)|^2 = 1 / ((1 - w^2)^2 + 0.01 w^2), max at w^2 = 1 - 0.005
        let wp = (1.0f64 - 0.005).sqrt();
        let exact = 1.0 / ((1.0 - wp * wp).powi(2) + 0.01 * wp * wp).sqrt();
        assert!((r.gamma - exact).abs() <= 1e-6 * exact);
        assert!((r.peak_frequency - wp).abs() < 1e-2);
    }

    #[test]
    fn feedthrough_handled() {
        let mut ss = scalar_ss();
        ss.d[(0, 0)] = 0.5;
        // G(s) = 1/(s+1) + 0.5, peak at w = 0
        let r = hinf_norm(&ss).unwrap();
        assert!((r.gamma - 1.5).abs() <= 1e-6 * 1.5);
    }

    #[test]
    fn storage_certificate_above_optimum() {
        let sys = fixtures::buffer_network();
        let ss = closed_loop(&sys, &synth_optimal(&sys).unwrap()).unwrap();
        let cert = storage_certificate(&ss, optimal_gamma(&sys) * 1.001, 1e-8).unwrap();
        assert!(cert.holds(1e-8), "{cert:?}");
    }
}
