//! Metzler and internal-positivity certificates.
//!
//! `x' = a x + b v, y = c x + d v` is internally positive iff `a` is Metzler
//! and `b`, `c`, `d` are entrywise nonnegative.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{LtiSystem, StateSpace};
use crate::synthesis::synth_optimal;

/// Offending entry `(row, col, value)`.
pub type Witness = (usize, usize, f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetzlerCheck {
    pub is_metzler: bool,
    /// Most negative off-diagonal entry when the check fails.
    pub witness: Option<Witness>,
}

pub fn is_metzler(m: &DMatrix<f64>, tol: f64) -> Result<MetzlerCheck> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "metzler test on {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut worst: Option<Witness> = None;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if i != j && v < -tol && worst.is_none_or(|(_, _, w)| v < w) {
                worst = Some((i, j, v));
            }
        }
    }
    Ok(MetzlerCheck {
        is_metzler: worst.is_none(),
        witness: worst,
    })
}

fn most_negative(m: &DMatrix<f64>, tol: f64) -> Option<Witness> {
    let mut worst: Option<Witness> = None;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v < -tol && worst.is_none_or(|(_, _, w)| v < w) {
                worst = Some((i, j, v));
            }
        }
    }
    worst
}

/// Which of the four matrices a witness came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    A,
    B,
    C,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityCertificate {
    pub metzler_a: bool,
    pub nonneg_b: bool,
    pub nonneg_c: bool,
    pub nonneg_d: bool,
    pub verdict: bool,
    /// Worst violating entry over all four matrices.
    pub witness: Option<(Part, Witness)>,
}

pub fn internal_positivity(ss: &StateSpace, tol: f64) -> Result<PositivityCertificate> {
    let a = is_metzler(&ss.a, tol)?;
    let b = most_negative(&ss.b, tol);
    let c = most_negative(&ss.c, tol);
    let d = most_negative(&ss.d, tol);
    let witness = [
        (Part::A, a.witness),
        (Part::B, b),
        (Part::C, c),
        (Part::D, d),
    ]
    .into_iter()
    .filter_map(|(p, w)| w.map(|w| (p, w)))
    .min_by(|x, y| x.1 .2.total_cmp(&y.1 .2));
    let cert = PositivityCertificate {
        metzler_a: a.is_metzler,
        nonneg_b: b.is_none(),
        nonneg_c: c.is_none(),
        nonneg_d: d.is_none(),
        verdict: a.is_metzler && b.is_none() && c.is_none() && d.is_none(),
        witness,
    };
    Ok(cert)
}

/// The disturbance-to-state map `(a + b l, I, I, 0)` of a feedback loop.
pub fn disturbance_to_state(sys: &LtiSystem, l: &DMatrix<f64>) -> Result<StateSpace> {
    if l.shape() != (sys.m(), sys.n()) {
        return Err(Error::DimensionMismatch(format!(
            "gain is {}x{}, plant needs {}x{}",
            l.nrows(),
            l.ncols(),
            sys.m(),
            sys.n()
        )));
    }
    let n = sys.n();
    StateSpace::new(
        sys.a() + sys.b() * l,
        DMatrix::identity(n, n),
        DMatrix::identity(n, n),
        DMatrix::zeros(n, n),
    )
}

/// For diagonal `a`: whether the loop closed by `b^T a^{-1}` is internally
/// positive from `w` to `x`, which holds iff `-b b^T` is Metzler.
///
/// Both sides of the equivalence are evaluated; disagreement is an error.
pub fn closed_loop_positivity_condition(sys: &LtiSystem, tol: f64) -> Result<bool> {
    if !sys.is_diagonal() {
        let a = sys.a();
        let mut worst = 0.0_f64;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                if i != j {
                    worst = worst.max(a[(i, j)].abs());
                }
            }
        }
        return Err(Error::NotDiagonalA(worst));
    }
    let from_b = is_metzler(&-(sys.b() * sys.b().transpose()), tol)?.is_metzler;
    let l = synth_optimal(sys)?;
    let from_closed_loop = is_metzler(&(sys.a() + sys.b() * &l.l), tol)?.is_metzler;
    if from_b != from_closed_loop {
        return Err(Error::PositivityMismatch {
            from_b,
            from_closed_loop,
        });
    }
    Ok(from_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    #[test]
    fn chain_incidence_gives_metzler_laplacian() {
        let b = fixtures::buffer_chain().b().clone();
        let m = -(&b * b.transpose());
        let expected =
            DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -1.0]);
        assert_eq!(m, expected);
        assert!(is_metzler(&m, 1e-12).unwrap().is_metzler);
    }

    #[test]
    fn witness_reports_worst_entry() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0]);
        let c = is_metzler(&m, 1e-12).unwrap();
        assert!(!c.is_metzler);
        assert_eq!(c.witness, Some((0, 1, -1.0)));
    }

    #[test]
    fn diagonal_is_metzler() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-5.0, 3.0, -1e9]));
        assert!(is_metzler(&m, 0.0).unwrap().is_metzler);
    }

    #[test]
    fn chain_closed_loop_is_positive() {
        let sys = fixtures::buffer_chain();
        let ss = disturbance_to_state(&sys, &fixtures::buffer_chain_gain()).unwrap();
        assert!(internal_positivity(&ss, 1e-12).unwrap().verdict);
        assert!(closed_loop_positivity_condition(&sys, 1e-12).unwrap());
    }

    #[test]
    fn buffer_network_closed_loop_sign_pattern() {
        let sys = fixtures::buffer_network();
        let l = fixtures::buffer_network_sparse_gain();
        let a_cl = sys.a() + sys.b() * &l;
        // a + b l computed by hand from the rational entries
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[-2.0, 1.0 / 3.0, 0.0, 1.0, -4.0, 0.5, 0.0, 1.0 / 3.0, -2.5],
        );
        assert!(crate::linalg::max_abs(&(&a_cl - &expected)) < 1e-15);
        let cert = internal_positivity(&disturbance_to_state(&sys, &l).unwrap(), 1e-12).unwrap();
        assert_eq!(
            cert.metzler_a,
            is_metzler(&expected, 1e-12).unwrap().is_metzler
        );
        assert!(cert.verdict);
    }

    #[test]
    fn negative_output_matrix_breaks_positivity() {
        let n = 2;
        let ss = StateSpace::new(
            -DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            -DMatrix::identity(n, n),
            DMatrix::zeros(n, n),
        )
        .unwrap();
        let cert = internal_positivity(&ss, 1e-12).unwrap();
        assert!(!cert.nonneg_c && !cert.verdict);
        assert_eq!(cert.witness.unwrap().0, Part::C);
    }

    #[test]
    fn simple_conditions() {
        let eye = DMatrix::identity(2, 2);
        let sys = LtiSystem::new(-eye.clone(), eye).unwrap();
        assert!(closed_loop_positivity_condition(&sys, 1e-12).unwrap());
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let sys = LtiSystem::new(a, b).unwrap();
        assert!(closed_loop_positivity_condition(&sys, 1e-12).unwrap());
    }

    #[test]
    fn non_diagonal_a_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.5, -2.0]);
        let sys = LtiSystem::new(a, DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            closed_loop_positivity_condition(&sys, 1e-12),
            Err(Error::NotDiagonalA(_))
        ));
    }
}
