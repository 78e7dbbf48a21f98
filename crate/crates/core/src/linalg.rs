//! Dense linear-algebra helpers shared by the synthesis and verification
//! modules: eigenvalues through the real Schur form, ordered Schur
//! reordering, small Lyapunov solves and a few norms.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

const SCHUR_MAX_ITER: usize = 10_000;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Solve `a x = b` by LU with partial pivoting.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve: {}x{} system with {}x{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    a.clone()
        .lu()
        .solve(b)
        .filter(all_finite)
        .ok_or_else(|| Error::NonFiniteResult("LU solve (singular matrix)".into()))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return vec![0.0];
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

pub fn spectral_norm_complex(m: &DMatrix<Complex<f64>>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, &b| a.max(b))
}

/// 2-norm condition number from singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    Ok(RealSchur::new(m)?.eigenvalues())
}

pub fn max_real_part(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Real Schur form `m = z t z^T` with explicit block bookkeeping.
///
/// `blocks` holds the size (1 or 2) of each diagonal block in order; every
/// 2x2 block carries a complex-conjugate eigenvalue pair.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub t: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub blocks: Vec<usize>,
}

impl RealSchur {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Schur decomposition of {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        if !all_finite(m) {
            return Err(Error::NonFiniteResult("Schur input".into()));
        }
        let n = m.nrows();
        if n == 0 {
            return Ok(RealSchur {
                t: DMatrix::zeros(0, 0),
                z: DMatrix::zeros(0, 0),
                blocks: vec![],
            });
        }
        let (z, t) = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or_else(|| Error::NoConvergence {
                iterations: SCHUR_MAX_ITER,
                context: "real Schur decomposition".into(),
            })?
            .unpack();
        let mut schur = RealSchur {
            t,
            z,
            blocks: Vec::with_capacity(n),
        };
        schur.detect_blocks();
        Ok(schur)
    }

    fn detect_blocks(&mut self) {
        let n = self.t.nrows();
        let mut i = 0;
        let mut blocks = Vec::new();
        while i < n {
            if i + 1 < n {
                let sub = self.t[(i + 1, i)];
                let scale = self.t[(i, i)].abs() + self.t[(i + 1, i + 1)].abs();
                if sub != 0.0 && sub.abs() > f64::EPSILON * scale {
                    if self.split_real_pair(i) {
                        blocks.push(1);
                        i += 1;
                    } else {
                        blocks.push(2);
                        i += 2;
                    }
                    continue;
                }
                self.t[(i + 1, i)] = 0.0;
            }
            blocks.push(1);
            i += 1;
        }
        self.blocks = blocks;
    }

    /// Triangularize the 2x2 block at `i` if its eigenvalues are real.
    fn split_real_pair(&mut self, i: usize) -> bool {
        let (a, b, c, d) = (
            self.t[(i, i)],
            self.t[(i, i + 1)],
            self.t[(i + 1, i)],
            self.t[(i + 1, i + 1)],
        );
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc < 0.0 {
            return false;
        }
        let mean = 0.5 * (a + d);
        let root = disc.sqrt();
        let lambda = if half >= 0.0 {
            mean + root
        } else {
            mean - root
        };
        // eigenvector of lambda, picking the better-conditioned of two forms
        let (v0, v1) = if (lambda - d).abs() + c.abs() >= b.abs() + (lambda - a).abs() {
            (lambda - d, c)
        } else {
            (b, lambda - a)
        };
        let norm = v0.hypot(v1);
        if norm == 0.0 {
            return false;
        }
        let g = DMatrix::from_row_slice(2, 2, &[v0 / norm, -v1 / norm, v1 / norm, v0 / norm]);
        self.apply_orthogonal(i, &g);
        self.t[(i + 1, i)] = 0.0;
        true
    }

    /// Similarity transform by `g` acting on rows/cols `i..i+g.nrows()`.
    fn apply_orthogonal(&mut self, i: usize, g: &DMatrix<f64>) {
        let k = g.nrows();
        let n = self.t.nrows();
        let rows = self.t.rows(i, k).into_owned();
        self.t.rows_mut(i, k).copy_from(&(g.transpose() * rows));
        let cols = self.t.columns(i, k).into_owned();
        self.t.columns_mut(i, k).copy_from(&(cols * g));
        let zc = self.z.columns(i, k).into_owned();
        self.z.columns_mut(i, k).copy_from(&(zc * g));
        debug_assert_eq!(self.t.nrows(), n);
    }

    fn block_starts(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for b in &self.blocks {
            s.push(acc);
            acc += b;
        }
        s
    }

    fn block_eigenvalues(&self, start: usize, size: usize) -> Vec<Complex<f64>> {
        if size == 1 {
            return vec![Complex::new(self.t[(start, start)], 0.0)];
        }
        let (a, b, c, d) = (
            self.t[(start, start)],
            self.t[(start, start + 1)],
            self.t[(start + 1, start)],
            self.t[(start + 1, start + 1)],
        );
        let mean = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc >= 0.0 {
            let r = disc.sqrt();
            vec![Complex::new(mean + r, 0.0), Complex::new(mean - r, 0.0)]
        } else {
            let im = (-disc).sqrt();
            vec![Complex::new(mean, im), Complex::new(mean, -im)]
        }
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.block_starts()
            .into_iter()
            .zip(&self.blocks)
            .flat_map(|(s, &k)| self.block_eigenvalues(s, k))
            .collect()
    }

    /// Move every block whose eigenvalues satisfy `select` to the leading
    /// position, keeping `t` quasi-triangular and `z` orthogonal. Returns the
    /// dimension of the selected invariant subspace.
    pub fn reorder<F: Fn(Complex<f64>) -> bool>(&mut self, select: F) -> Result<usize> {
        let mut wanted: Vec<bool> = self
            .block_starts()
            .into_iter()
            .zip(&self.blocks)
            .map(|(s, &k)| select(self.block_eigenvalues(s, k)[0]))
            .collect();
        let mut head = 0; // number of blocks already in place
        for idx in 0..wanted.len() {
            if !wanted[idx] {
                continue;
            }
            // bubble block idx up to position head
            let mut j = idx;
            while j > head {
                self.swap_adjacent(j - 1)?;
                self.blocks.swap(j - 1, j);
                wanted.swap(j - 1, j);
                j -= 1;
            }
            head += 1;
        }
        Ok(self.blocks[..head].iter().sum())
    }

    /// Swap diagonal blocks `k` and `k+1`.
    fn swap_adjacent(&mut self, k: usize) -> Result<()> {
        let start = self.block_starts()[k];
        let p = self.blocks[k];
        let q = self.blocks[k + 1];
        let a11 = self.t.view((start, start), (p, p)).into_owned();
        let a12 = self.t.view((start, start + p), (p, q)).into_owned();
        let a22 = self.t.view((start + p, start + p), (q, q)).into_owned();

        // a11 x - x a22 = a12 in Kronecker form (column-major vec)
        let size = p * q;
        let mut kron = DMatrix::zeros(size, size);
        for col in 0..q {
            for row in 0..p {
                let eq = col * p + row;
                for r in 0..p {
                    kron[(eq, col * p + r)] += a11[(row, r)];
                }
                for c in 0..q {
                    kron[(eq, c * p + row)] -= a22[(c, col)];
                }
            }
        }
        let rhs = DVector::from_iterator(size, a12.iter().copied());
        let x = kron
            .lu()
            .solve(&rhs)
            .filter(|v| v.iter().all(|e| e.is_finite()))
            .ok_or_else(|| Error::NonFiniteResult("Schur block swap (close eigenvalues)".into()))?;
        let x = DMatrix::from_column_slice(p, q, x.as_slice());

        // orthonormal basis whose first q columns span [-x; I]
        let mut basis = DMatrix::zeros(p + q, p + q);
        basis.view_mut((0, 0), (p, q)).copy_from(&(-x));
        basis.view_mut((p, 0), (q, q)).fill_with_identity();
        basis.view_mut((0, q), (p, p)).fill_with_identity();
        let g = basis.qr().q();
        self.apply_orthogonal(start, &g);
        self.t.view_mut((start + q, start), (p, q)).fill(0.0);
        Ok(())
    }
}

/// Solve `a x + x a^T + q = 0` by direct Kronecker elimination.
///
/// Intended for the small closed loops handled here; cost grows as n^6.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch("lyapunov operands".into()));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let kron = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let x = kron
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonFiniteResult("Lyapunov solve".into()))?;
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, x.as_slice())))
}
