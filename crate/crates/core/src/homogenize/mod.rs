//! Effective-tensor computation on the periodized medium.
//!
//! Four routes to the tensor:
//! - [`sigma_primal_discrete`]: per direction `l = e_k`, solve the lattice
//!   cell problem `∇*(ξ ⊙ (e_k + ∇f_k)) = 0` and evaluate the energy form
//!   `σ_jk = N^{-d} Σ_x Σ_i ξ_i (δ_ij + ∇_i f_j)(δ_ik + ∇_i f_k)`.
//! - [`sigma_dual_discrete`]: minimize the reciprocal-weighted energy over
//!   the solenoidal subspace; the resulting quadratic form is exactly
//!   `ᵗl σ⁻¹ l` at finite `N`.
//! - [`sigma_primal_continuous`]: conforming multilinear cells with per-cell
//!   constant `A` and midpoint quadrature.
//! - [`sigma_nonsym`]: the same cell discretization for `a + E(x)` with a
//!   skew stream matrix `E`; the flux average defines the non-symmetric
//!   tensor and `D = 2σ_sym`.
//!
//! Off-diagonal entries always come from the `d` per-direction correctors by
//! polarization; no extra solves.

mod continuous;
mod discrete;
mod norris;

pub use continuous::{
    cell_grad, cell_grad_adjoint, edge_to_cell_matrix, sigma_nonsym, sigma_primal_continuous,
    CellProjector,
};
pub use discrete::{sigma_dual_discrete, sigma_dual_discrete_via_stream, sigma_primal_discrete};
pub use norris::norris_value;

use crate::lattice::{LatticeError, ScalarField, TorusGrid, VectorField};
use crate::linalg;
use crate::media::MediaError;
use crate::solvers::{SolveReport, SolverError};
use crate::weyl::WeylError;

/// Which variational route produced a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Primal,
    Dual,
    Nonsym,
    Norris,
}

#[derive(Debug)]
pub enum HomogenizeError {
    Solver(SolverError),
    NotConverged { direction: usize, report: SolveReport },
    NonElliptic { site: usize, min_eigenvalue: f64 },
    NotSkew { max_violation: f64 },
    NotSymmetric { max_violation: f64 },
    InvariantViolation(String),
    AssemblyMismatch { max_dev: f64, tol: f64 },
    Lattice(LatticeError),
    Media(MediaError),
    Weyl(WeylError),
}

impl std::fmt::Display for HomogenizeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HomogenizeError::Solver(e) => write!(f, "{e}"),
            HomogenizeError::NotConverged { direction, report } => write!(
                f,
                "cell solve for direction {direction} stalled at residual {:e} after {} iterations",
                report.residual, report.iterations
            ),
            HomogenizeError::NonElliptic { site, min_eigenvalue } => {
                write!(f, "non-elliptic cell {site}: min eigenvalue {min_eigenvalue:e}")
            }
            HomogenizeError::NotSkew { max_violation } => {
                write!(f, "stream matrix not skew: max |E_ij + E_ji| = {max_violation:e}")
            }
            HomogenizeError::NotSymmetric { max_violation } => {
                write!(f, "coefficient matrix not symmetric: max |A_ij − A_ji| = {max_violation:e}")
            }
            HomogenizeError::InvariantViolation(msg) => write!(f, "tensor invariant violated: {msg}"),
            HomogenizeError::AssemblyMismatch { max_dev, tol } => write!(
                f,
                "energy-form and flux-average tensors disagree by {max_dev:e} (tolerance {tol:e})"
            ),
            HomogenizeError::Lattice(e) => write!(f, "{e}"),
            HomogenizeError::Media(e) => write!(f, "{e}"),
            HomogenizeError::Weyl(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for HomogenizeError {}

impl From<SolverError> for HomogenizeError {
    fn from(e: SolverError) -> Self {
        HomogenizeError::Solver(e)
    }
}

impl From<LatticeError> for HomogenizeError {
    fn from(e: LatticeError) -> Self {
        HomogenizeError::Lattice(e)
    }
}

impl From<MediaError> for HomogenizeError {
    fn from(e: MediaError) -> Self {
        HomogenizeError::Media(e)
    }
}

impl From<WeylError> for HomogenizeError {
    fn from(e: WeylError) -> Self {
        HomogenizeError::Weyl(e)
    }
}

/// Effective conductivity tensor with its provenance and solve diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EffectiveTensor {
    pub d: usize,
    pub n: usize,
    /// Row-major `d×d` entries. For [`Provenance::Dual`] the quadratic form
    /// of this matrix is `ᵗl σ⁻¹ l`.
    pub sigma: Vec<f64>,
    pub provenance: Provenance,
    /// Digest of the periodized medium realization this tensor describes.
    pub medium_digest: String,
    pub seed: Option<(u64, u64)>,
    pub sigma_sym_eigenvalues: Vec<f64>,
    pub reports: Vec<SolveReport>,
}

impl EffectiveTensor {
    pub fn new(
        grid: TorusGrid,
        sigma: Vec<f64>,
        provenance: Provenance,
        medium_digest: String,
        reports: Vec<SolveReport>,
    ) -> Result<Self, HomogenizeError> {
        let d = grid.d();
        let sym = linalg::sym_part(d, &sigma);
        let eigs = linalg::sym_eigenvalues(d, &sym);
        if eigs[0] <= 0.0 {
            return Err(HomogenizeError::InvariantViolation(format!(
                "symmetric part not positive definite (min eigenvalue {:e})",
                eigs[0]
            )));
        }
        Ok(EffectiveTensor {
            d,
            n: grid.n(),
            sigma,
            provenance,
            medium_digest,
            seed: None,
            sigma_sym_eigenvalues: eigs,
            reports,
        })
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.d + j]
    }

    /// Symmetric part `(σ + σᵀ)/2`.
    pub fn sym(&self) -> Vec<f64> {
        linalg::sym_part(self.d, &self.sigma)
    }

    /// Effective diffusivity `D = 2 σ_sym`.
    pub fn diffusivity(&self) -> Vec<f64> {
        self.sym().iter().map(|v| 2.0 * v).collect()
    }

    /// `max_jk |σ_jk − σ_kj|` — a solver-quality signal, surfaced rather than
    /// symmetrized away.
    pub fn asymmetry(&self) -> f64 {
        let t = linalg::transpose(self.d, &self.sigma);
        linalg::max_abs_diff(&self.sigma, &t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tensor serializes")
    }
}

/// Per-direction correctors and fluxes of a cell-problem solve.
///
/// For the discrete route the corrector is a site scalar and the flux an edge
/// field; for the cell routes the corrector is nodal and the flux cell-based
/// (stored in the same containers).
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub correctors: Vec<ScalarField>,
    pub fluxes: Vec<VectorField>,
    pub reports: Vec<SolveReport>,
}

/// Digest of a field realization: identifies the periodized medium the tensor
/// was computed from.
pub fn field_digest(values: &[f64], grid: TorusGrid) -> String {
    let mut h = 0x8422_2325_CBF2_9CE4u64 ^ ((grid.d() as u64) << 32 | grid.n() as u64);
    for v in values {
        h ^= v.to_bits();
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    format!("{h:016x}")
}

/// Recompute the tensor from flux averages (`σ e_k = N^{-d} Σ ξ⊙(e_k + ∇f_k)`)
/// and check it against the energy-form tensor. Disagreement beyond `tol`
/// indicates a solver or assembly defect.
pub fn sigma_from_energy_crosscheck(
    solution: &CellSolution,
    energy_tensor: &EffectiveTensor,
    tol: f64,
) -> Result<EffectiveTensor, HomogenizeError> {
    let d = energy_tensor.d;
    let mut sigma = vec![0.0; d * d];
    for (k, flux) in solution.fluxes.iter().enumerate() {
        let means = flux.component_means();
        for j in 0..d {
            sigma[j * d + k] = means[j];
        }
    }
    let max_dev = linalg::max_abs_diff(&sigma, &energy_tensor.sigma);
    if max_dev > tol {
        return Err(HomogenizeError::AssemblyMismatch { max_dev, tol });
    }
    let grid = TorusGrid::new(d, energy_tensor.n)?;
    EffectiveTensor::new(
        grid,
        sigma,
        energy_tensor.provenance,
        energy_tensor.medium_digest.clone(),
        vec![],
    )
}
