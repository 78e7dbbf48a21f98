//! Example plants used throughout the tests, the CLI data files and the docs.

use nalgebra::DMatrix;

use super::LtiSystem;
use crate::error::Result;

/// Three buffers driven by three links: `a = -diag(1, 3, 2)`.
pub fn buffer_network() -> LtiSystem {
    LtiSystem::new(
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -3.0, -2.0])),
        DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 1.0, 1.0, -1.0, 0.0, 0.0, 1.0]),
    )
    .expect("fixture is valid")
}

/// The sparse optimal gain of [`buffer_network`].
pub fn buffer_network_sparse_gain() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0,
            -1.0 / 3.0,
            0.0,
            0.0,
            -1.0 / 3.0,
            0.0,
            0.0,
            1.0 / 3.0,
            -0.5,
        ],
    )
}

/// A dense Riccati-derived gain for [`buffer_network`], given at two
/// decimals.
pub fn buffer_network_dense_gain() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[0.93, -0.11, 0.00, -0.05, -0.17, -0.01, 0.04, 0.16, -0.26],
    )
}

/// Three buffers in a chain connected by two directed links:
/// `a = -diag(1, 2, 4)`, `b` is the node-link incidence matrix.
pub fn buffer_chain() -> LtiSystem {
    LtiSystem::new(
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, -4.0])),
        DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 1.0, -1.0, 0.0, 1.0]),
    )
    .expect("fixture is valid")
}

pub fn buffer_chain_gain() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 0.0, 0.0, 0.5, -0.25])
}

/// Room temperatures of three adjacent rooms with losses `r[i]` to the
/// outside and wall coefficients `r12`, `r23`; every room has its own
/// heater/cooler.
pub fn room_temperature(r: [f64; 3], r12: f64, r23: f64) -> Result<LtiSystem> {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            -r[0] - r12,
            r12,
            0.0,
            r12,
            -r[1] - r12 - r23,
            r23,
            0.0,
            r23,
            -r[2] - r23,
        ],
    );
    LtiSystem::new(a, DMatrix::identity(3, 3))
}
