#![allow(dead_code)]

use hinfsf::model::LtiSystem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Symmetric negative definite `-(M M^T / n + 0.2 I)` with `M` uniform in
/// `(-1, 1)`; entries are O(1).
pub fn random_sym_hurwitz(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let m = uniform(rng, n, n, -1.0, 1.0);
    let a = -(&m * m.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2);
    (&a + a.transpose()) * 0.5
}

pub fn random_system(rng: &mut impl Rng, n: usize, m: usize) -> LtiSystem {
    let a = random_sym_hurwitz(rng, n);
    let b = uniform(rng, n, m, -1.0, 1.0);
    LtiSystem::new(a, b).expect("generated plant is valid")
}

pub fn random_diagonal_a(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| -rng.random_range(0.1..5.0)))
}

/// Diagonal Hurwitz `a` and a `b` whose entries are zero with probability
/// one half, so `-b b^T` is Metzler for a fair share of draws.
pub fn random_diagonal_system(rng: &mut impl Rng, n: usize, m: usize) -> LtiSystem {
    let a = random_diagonal_a(rng, n);
    let b = DMatrix::from_fn(n, m, |_, _| {
        if rng.random_bool(0.5) {
            0.0
        } else {
            rng.random_range(-2.0..2.0)
        }
    });
    LtiSystem::new(a, b).expect("generated plant is valid")
}

/// Node-link incidence matrix of a random directed graph on `n >= 2` nodes
/// with `m` links.
pub fn random_incidence(rng: &mut impl Rng, n: usize, m: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, m);
    for k in 0..m {
        let tail = rng.random_range(0..n);
        let mut head = rng.random_range(0..n - 1);
        if head >= tail {
            head += 1;
        }
        b[(tail, k)] = -1.0;
        b[(head, k)] = 1.0;
    }
    b
}

/// `(a_i, b_i)` blocks sharing input width `m`, with `nu` blocks of size up
/// to `max_n`.
pub fn random_blocks(
    rng: &mut impl Rng,
    nu: usize,
    m: usize,
    max_n: usize,
) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
    (0..nu)
        .map(|_| {
            let n = rng.random_range(1..=max_n);
            (random_sym_hurwitz(rng, n), uniform(rng, n, m, -1.0, 1.0))
        })
        .collect()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
