use nalgebra::{DMatrix, DVector};

use super::{synth_optimal, synth_weighted};
use crate::error::{Error, Result};
use crate::linalg::block_diag;
use crate::model::{validate_system, CostWeights, GainMatrix, LtiSystem};

/// Subsystems `x_i' = a_i x_i + b_i u_i + w_i` whose inputs must satisfy
/// `u_1 + ... + u_nu = 0`. All `u_i` share the width `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatedPlant {
    blocks: Vec<LtiSystem>,
}

impl CoordinatedPlant {
    pub fn new(
        blocks: Vec<(DMatrix<f64>, DMatrix<f64>)>,
        sym_tol: f64,
        stab_margin: f64,
    ) -> Result<Self> {
        let widths: Vec<usize> = blocks.iter().map(|(_, b)| b.ncols()).collect();
        if widths.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::IncompatibleInputWidths(widths));
        }
        let blocks = blocks
            .into_iter()
            .map(|(a, b)| validate_system(a, b, sym_tol, stab_margin))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoordinatedPlant { blocks })
    }

    pub fn from_systems(blocks: Vec<LtiSystem>) -> Result<Self> {
        let widths: Vec<usize> = blocks.iter().map(LtiSystem::m).collect();
        if widths.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::IncompatibleInputWidths(widths));
        }
        Ok(CoordinatedPlant { blocks })
    }

    pub fn blocks(&self) -> &[LtiSystem] {
        &self.blocks
    }

    /// Number of coordinating subsystems.
    pub fn nu(&self) -> usize {
        self.blocks.len()
    }

    /// Shared input width.
    pub fn input_width(&self) -> usize {
        self.blocks.first().map_or(0, LtiSystem::m)
    }

    pub fn state_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(LtiSystem::n).collect()
    }

    pub fn total_states(&self) -> usize {
        self.blocks.iter().map(LtiSystem::n).sum()
    }
}

/// `u_i = local_i x_i - sum_k global_k x_k`, with `local_i = b_i^T a_i^{-1}`
/// and `global_k = local_k / nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatedGain {
    pub local_terms: Vec<DMatrix<f64>>,
    pub global_terms: Vec<DMatrix<f64>>,
}

impl CoordinatedGain {
    pub fn nu(&self) -> usize {
        self.local_terms.len()
    }

    /// The full `(m nu) x (sum n_i)` gain acting on the stacked state.
    pub fn stacked(&self) -> DMatrix<f64> {
        let m = self.local_terms.first().map_or(0, |t| t.nrows());
        let dims: Vec<usize> = self.local_terms.iter().map(|t| t.ncols()).collect();
        let total: usize = dims.iter().sum();
        let nu = self.nu();
        let mut out = DMatrix::zeros(m * nu, total);
        for i in 0..nu {
            let mut col = 0;
            for (k, &nk) in dims.iter().enumerate() {
                let mut blk = -&self.global_terms[k];
                if i == k {
                    blk += &self.local_terms[k];
                }
                out.view_mut((i * m, col), (m, nk)).copy_from(&blk);
                col += nk;
            }
        }
        out
    }

    /// The shared term `sum_k global_k x_k`.
    pub fn global_signal(&self, states: &[DVector<f64>]) -> DVector<f64> {
        let m = self.local_terms.first().map_or(0, |t| t.nrows());
        self.global_terms
            .iter()
            .zip(states)
            .fold(DVector::zeros(m), |acc, (g, x)| acc + g * x)
    }

    /// Evaluate every `u_i` from per-subsystem states.
    pub fn inputs(&self, states: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let shared = self.global_signal(states);
        self.local_terms
            .iter()
            .zip(states)
            .map(|(l, x)| l * x - &shared)
            .collect()
    }
}

pub fn synth_coordinated(plant: &CoordinatedPlant) -> Result<CoordinatedGain> {
    let nu = plant.nu();
    if nu < 2 {
        return Err(Error::InvalidArgument(format!(
            "coordination needs at least two subsystems, got {nu}"
        )));
    }
    let local_terms = plant
        .blocks()
        .iter()
        .map(|b| synth_optimal(b).map(|g| g.l))
        .collect::<Result<Vec<_>>>()?;
    let global_terms = local_terms.iter().map(|l| l / nu as f64).collect();
    Ok(CoordinatedGain {
        local_terms,
        global_terms,
    })
}

/// Unconstrained reformulation: eliminate `u_1 = -(u_2 + ... + u_nu)`.
#[derive(Debug, Clone)]
pub struct ReducedCoordination {
    /// `a = diag(a_i)`, `b = diag(b_i) d`.
    pub system: LtiSystem,
    /// `q = I`, `r = d^T d = (I + 1 1^T) (x) I_m`.
    pub weights: CostWeights,
    /// `d = [-1^T (x) I_m; I_{(nu-1) m}]`, mapping reduced inputs to all inputs.
    pub basis: DMatrix<f64>,
}

pub fn reduce_coordination(plant: &CoordinatedPlant) -> Result<ReducedCoordination> {
    let nu = plant.nu();
    if nu < 2 {
        return Err(Error::InvalidArgument(format!(
            "coordination needs at least two subsystems, got {nu}"
        )));
    }
    let m = plant.input_width();
    let free = (nu - 1) * m;
    let mut d = DMatrix::zeros(nu * m, free);
    for k in 0..nu - 1 {
        for j in 0..m {
            d[(j, k * m + j)] = -1.0;
        }
    }
    d.view_mut((m, 0), (free, free)).fill_with_identity();

    let a = block_diag(
        &plant
            .blocks()
            .iter()
            .map(|s| s.a().clone())
            .collect::<Vec<_>>(),
    );
    let b = block_diag(
        &plant
            .blocks()
            .iter()
            .map(|s| s.b().clone())
            .collect::<Vec<_>>(),
    );
    let first = &plant.blocks()[0];
    let system = validate_system(a, b * &d, first.sym_tol(), first.stab_margin())?;
    let n = system.n();
    let r = d.transpose() * &d;
    let weights = CostWeights::new(DMatrix::identity(n, n), r, 0.0)?;
    Ok(ReducedCoordination {
        system,
        weights,
        basis: d,
    })
}

/// Map a gain for the reduced inputs back to all `nu` inputs.
pub fn expand_reduced_gain(basis: &DMatrix<f64>, reduced: &GainMatrix) -> GainMatrix {
    GainMatrix::new(basis * &reduced.l)
}

impl ReducedCoordination {
    /// Solve the reduced weighted problem and expand it to all inputs.
    pub fn solve(&self, pd_tol: f64) -> Result<GainMatrix> {
        let reduced = synth_weighted(&self.system, &self.weights, pd_tol)?;
        Ok(expand_reduced_gain(&self.basis, &reduced))
    }
}
