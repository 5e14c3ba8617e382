//! Polarization (least-squares) functional for the non-symmetric operator.
//!
//! For vectors `ξ, l` the functional
//!
//! `inf_{f, p} N^{-d} Σ_cell |ξ − p − (a+E(x))(l − ∇f(x))|²_{a^{-1}}`
//!
//! over nodal scalars `f` and zero-mean solenoidal cell fields `p` equals
//! `ᵗ(ξ − σl) σ_sym⁻¹ (ξ − σl)` for the tensor σ assembled from the cell
//! problem — the identity holds exactly at finite `N` because the cell fields
//! decompose orthogonally into gradients, their complement and constants.
//! The solenoidal variable is handled through the exact spectral projection
//! rather than an explicit skew parametrization, which on even grids would
//! miss the checkerboard modes of the cell-gradient kernel.

use crate::lattice::{MatrixField, ScalarField, VectorField};
use crate::linalg;
use crate::solvers::{least_squares_minimize, SolveOptions, SolveReport};

use super::continuous::{cell_grad, cell_grad_adjoint, CellProjector};
use super::HomogenizeError;

/// Minimal value of the polarization functional at `(ξ, l)`.
pub fn norris_value(
    a: &[f64],
    e: &MatrixField,
    xi: &[f64],
    l: &[f64],
    opts: SolveOptions,
) -> Result<(f64, SolveReport), HomogenizeError> {
    let grid = e.grid();
    let d = grid.d();
    let sites = grid.sites();
    assert_eq!(a.len(), d * d);
    assert_eq!(xi.len(), d);
    assert_eq!(l.len(), d);

    let skew_violation = e.max_skew_violation();
    if skew_violation > 0.0 {
        return Err(HomogenizeError::NotSkew { max_violation: skew_violation });
    }
    let a_inv = linalg::inverse(d, a).ok_or(HomogenizeError::NonElliptic {
        site: 0,
        min_eigenvalue: 0.0,
    })?;
    let a_minus_e = |y: &VectorField| -> VectorField {
        // ᵗ(a+E) y = (a − E) y pointwise
        let mut out = VectorField::zeros(grid);
        for i in 0..d {
            for cell in 0..sites {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += (a[i * d + j] - e.get(i, j, cell)) * y.get(j, cell);
                }
                out.set(i, cell, acc);
            }
        }
        out
    };
    let a_plus_e = |y: &VectorField| -> VectorField {
        let mut out = VectorField::zeros(grid);
        for i in 0..d {
            for cell in 0..sites {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += (a[i * d + j] + e.get(i, j, cell)) * y.get(j, cell);
                }
                out.set(i, cell, acc);
            }
        }
        out
    };

    // target t = ξ − (a+E) l, per cell
    let l_field = VectorField::from_fn(grid, |i, _| l[i]);
    let mut target = a_plus_e(&l_field);
    for i in 0..d {
        for v in target.component_mut(i) {
            *v = xi[i] - *v;
        }
    }

    let projector = CellProjector::new(grid);
    let udim = sites + d * sites; // nodal f, then cell field q
    let vdim = d * sites;

    let apply_b = |u: &[f64], out: &mut [f64]| {
        let f = ScalarField::from_values(grid, u[..sites].to_vec()).expect("finite iterate");
        let grad_part = a_plus_e(&cell_grad(&f));
        let mut q = u[sites..].to_vec();
        projector.project_complement(&mut q);
        for i in 0..vdim {
            out[i] = q[i] - grad_part.values()[i];
        }
    };
    let apply_bt = |y: &[f64], out: &mut [f64]| {
        let yf = VectorField::from_values(grid, y.to_vec()).expect("finite adjoint input");
        let f_block = cell_grad_adjoint(&a_minus_e(&yf));
        for (o, v) in out[..sites].iter_mut().zip(f_block.values()) {
            *o = -v;
        }
        let mut q = y.to_vec();
        projector.project_complement(&mut q);
        out[sites..].copy_from_slice(&q);
    };
    let weight = |y: &[f64], out: &mut [f64]| {
        for cell in 0..sites {
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += a_inv[i * d + j] * y[j * sites + cell];
                }
                out[i * sites + cell] = acc;
            }
        }
    };
    let deflate = |u: &mut [f64]| {
        // gauge: the f block is defined up to additive constants
        let mean = u[..sites].iter().sum::<f64>() / sites as f64;
        for v in &mut u[..sites] {
            *v -= mean;
        }
    };

    let (_, value, report) =
        least_squares_minimize(apply_b, apply_bt, weight, target.values(), udim, deflate, opts)?;
    Ok((value / sites as f64, report))
}
