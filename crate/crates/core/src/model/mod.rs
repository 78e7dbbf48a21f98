//! System data types, validation of the standing assumptions (symmetric,
//! Hurwitz state matrix) and structural queries on matrices.

pub mod fixtures;
pub mod io;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Default tolerances. Every operation that needs one takes it explicitly;
/// this struct just collects the defaults in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative asymmetry allowed in `a` (scaled by `max|a_ij|`).
    pub sym_tol: f64,
    /// Required distance of the spectrum from the imaginary axis.
    pub stab_margin: f64,
    /// Smallest eigenvalue accepted as "positive definite".
    pub pd_tol: f64,
    /// Condition estimate above which a state matrix counts as singular.
    pub cond_limit: f64,
    /// Relative width of the final H-infinity norm bracket.
    pub bisect_tol: f64,
    /// Relative distance from the imaginary axis treated as "on" it.
    pub imag_tol: f64,
    pub max_iter: usize,
    /// Entrywise sign tolerance for Metzler / nonnegativity checks.
    pub positivity_tol: f64,
    /// Relative bracket width for the Riccati gamma iteration.
    pub gamma_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sym_tol: 1e-9,
            stab_margin: 1e-9,
            pd_tol: 1e-12,
            cond_limit: 1e12,
            bisect_tol: 1e-6,
            imag_tol: 1e-8,
            max_iter: 200,
            positivity_tol: 1e-12,
            gamma_tol: 1e-6,
        }
    }
}

/// Plant `x' = a x + b u + w` with `a` symmetric and Hurwitz.
///
/// Only constructible through [`LtiSystem::new`] (or the loaders), so holding
/// one means the assumptions were checked. `a` is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    sym_tol: f64,
    stab_margin: f64,
}

impl LtiSystem {
    /// Validate with the default tolerances.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let t = Tolerances::default();
        validate_system(a, b, t.sym_tol, t.stab_margin)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn sym_tol(&self) -> f64 {
        self.sym_tol
    }

    pub fn stab_margin(&self) -> f64 {
        self.stab_margin
    }

    pub fn is_diagonal(&self) -> bool {
        off_diagonal_max(&self.a) == 0.0
    }
}

fn off_diagonal_max(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

/// Check the plant assumptions and build an [`LtiSystem`].
///
/// Asymmetry up to `sym_tol * max|a_ij|` is removed by replacing `a` with
/// `(a + a^T) / 2`. Hurwitz-ness is checked on the matrix as given, using a
/// general eigensolver.
pub fn validate_system(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    sym_tol: f64,
    stab_margin: f64,
) -> Result<LtiSystem> {
    if !(sym_tol > 0.0 && stab_margin > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerances must be positive (sym_tol = {sym_tol}, stab_margin = {stab_margin})"
        )));
    }
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "a is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::DimensionMismatch("a is empty".into()));
    }
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "b has {} rows, a is {}x{}",
            b.nrows(),
            a.nrows(),
            a.ncols()
        )));
    }
    if !linalg::all_finite(&a) || !linalg::all_finite(&b) {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }

    let asym = linalg::asymmetry(&a);
    let tol = sym_tol * linalg::max_abs(&a);
    if asym > tol {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tol,
        });
    }

    let max_real = linalg::max_real_part(&a)?;
    if max_real > -stab_margin {
        return Err(Error::NotHurwitz {
            max_real,
            margin: stab_margin,
        });
    }

    let a = if asym > 0.0 {
        linalg::symmetrize(&a)
    } else {
        a
    };
    Ok(LtiSystem {
        a,
        b,
        sym_tol,
        stab_margin,
    })
}

/// Positive-definite state and input weights `q = C^T C`, `r = D^T D`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl CostWeights {
    /// Checks that both weights are symmetric positive definite
    /// (every eigenvalue at least `pd_tol`).
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, pd_tol: f64) -> Result<Self> {
        for (name, w) in [("q", &q), ("r", &r)] {
            if !w.is_square() || w.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected nonempty square",
                    w.nrows(),
                    w.ncols()
                )));
            }
            let asym = linalg::asymmetry(w);
            if asym > 1e-12 * linalg::max_abs(w) {
                return Err(Error::InadmissibleWeights(format!(
                    "{name} is not symmetric (asymmetry {asym:e})"
                )));
            }
            let min = linalg::sym_eigenvalues(&linalg::symmetrize(w))[0];
            if min < pd_tol {
                return Err(Error::InadmissibleWeights(format!(
                    "{name} is not positive definite (min eigenvalue {min:e})"
                )));
            }
        }
        Ok(CostWeights { q, r })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        CostWeights {
            q: DMatrix::identity(n, n),
            r: DMatrix::identity(m, m),
        }
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Whether `-a q^{-1}` is symmetric (within `sym_tol`, relative) and
    /// positive definite (eigenvalues at least `pd_tol`).
    pub fn admissible(&self, a: &DMatrix<f64>, sym_tol: f64, pd_tol: f64) -> Result<()> {
        if self.q.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "q is {}x{}, a is {}x{}",
                self.q.nrows(),
                self.q.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        // a q^{-1} = (q^{-T} a^T)^T
        let m = -linalg::solve(&self.q.transpose(), &a.transpose())?.transpose();
        let asym = linalg::asymmetry(&m);
        if asym > sym_tol * linalg::max_abs(&m) {
            return Err(Error::InadmissibleWeights(format!(
                "-a q^-1 is not symmetric (asymmetry {asym:e})"
            )));
        }
        let min = linalg::sym_eigenvalues(&linalg::symmetrize(&m))[0];
        if min < pd_tol {
            return Err(Error::InadmissibleWeights(format!(
                "-a q^-1 is not positive definite (min eigenvalue {min:e})"
            )));
        }
        Ok(())
    }
}

/// Static feedback gain `u = l x` (m x n).
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub l: DMatrix<f64>,
}

impl GainMatrix {
    pub fn new(l: DMatrix<f64>) -> Self {
        GainMatrix { l }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        GainMatrix {
            l: DMatrix::zeros(m, n),
        }
    }

    pub fn check_dims(&self, sys: &LtiSystem) -> Result<()> {
        if self.l.shape() != (sys.m(), sys.n()) {
            return Err(Error::DimensionMismatch(format!(
                "gain is {}x{}, plant needs {}x{}",
                self.l.nrows(),
                self.l.ncols(),
                sys.m(),
                sys.n()
            )));
        }
        Ok(())
    }

    pub fn sparsity(&self, zero_tol: f64) -> SparsityPattern {
        sparsity_pattern(&self.l, zero_tol)
    }
}

/// Realization `(a, b, c, d)`: `x' = a x + b w`, `y = c x + d w`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let ok = a.is_square()
            && b.nrows() == n
            && c.ncols() == n
            && d.nrows() == c.nrows()
            && d.ncols() == b.ncols();
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "state space a {:?}, b {:?}, c {:?}, d {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(StateSpace { a, b, c, d })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// Boolean mask of entries with magnitude above `zero_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    pub mask: DMatrix<bool>,
    pub zero_tol: f64,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn transpose(&self) -> SparsityPattern {
        SparsityPattern {
            mask: self.mask.transpose(),
            zero_tol: self.zero_tol,
        }
    }

    /// Same shape and the same nonzero positions (the tolerances may differ).
    pub fn same_mask(&self, other: &SparsityPattern) -> bool {
        self.mask == other.mask
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        self.mask
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

pub fn sparsity_pattern(m: &DMatrix<f64>, zero_tol: f64) -> SparsityPattern {
    SparsityPattern {
        mask: m.map(|v| v.abs() > zero_tol),
        zero_tol,
    }
}

/// Node-link incidence matrix test: each column holds exactly one `+1`,
/// exactly one `-1` and zeros elsewhere.
pub fn is_incidence_matrix(b: &DMatrix<f64>) -> bool {
    if b.ncols() == 0 || b.nrows() < 2 {
        return false;
    }
    b.column_iter().all(|col| {
        let mut plus = 0;
        let mut minus = 0;
        for &v in col.iter() {
            if v == 1.0 {
                plus += 1;
            } else if v == -1.0 {
                minus += 1;
            } else if v != 0.0 {
                return false;
            }
        }
        plus == 1 && minus == 1
    })
}
