//! Conforming-cell discretization of the continuous operators.
//!
//! Nodes are the lattice sites; cell `x` spans `[x, x+1]^d` with one
//! multilinear trial function per node and per-cell constant coefficients
//! evaluated by midpoint quadrature. The cell gradient of a nodal function is
//! the average of the forward differences over the cell's parallel edges:
//!
//! `(∇f)_j(cell x) = 2^{-(d−1)} [ Σ_{s_j=1} f(x+s) − Σ_{s_j=0} f(x+s) ]`,
//! `s ∈ {0,1}^d`.
//!
//! With midpoint quadrature the stiffness operator is `Cᵀ A C` (`C` the cell
//! gradient); on even grids `C` has checkerboard kernel modes in addition to
//! constants. The energy never sees them, right-hand sides are orthogonal to
//! them, and Krylov iterates stay in the orthogonal complement, so correctors
//! are defined up to harmless gauge and the tensor is unique. The spectral
//! preconditioner zeroes those modes explicitly.

use crate::fft::{ModeSymbol, SpectralSplitter, TorusFft};
use crate::lattice::{MatrixField, ScalarField, TorusGrid, VectorField};
use crate::linalg;
use crate::media::EdgeConductanceField;
use crate::par;
use crate::solvers::{cg, gmres_restarted, remove_mean, SolveOptions, SpectralPreconditioner};

use super::{field_digest, CellSolution, EffectiveTensor, HomogenizeError, Provenance};

/// Corner offsets `{0,1}^d` as packed bit patterns.
fn corners(d: usize) -> Vec<[i64; 3]> {
    (0..1usize << d)
        .map(|bits| {
            let mut s = [0i64; 3];
            for axis in 0..d {
                s[axis] = ((bits >> axis) & 1) as i64;
            }
            s
        })
        .collect()
}

/// Cell gradient `C`: nodal scalar to per-cell vector.
pub fn cell_grad(f: &ScalarField) -> VectorField {
    let grid = f.grid();
    let d = grid.d();
    let sites = grid.sites();
    let fv = f.values();
    let corners = corners(d);
    let scale = 1.0 / (1usize << (d - 1)) as f64;
    let mut out = vec![0.0; d * sites];
    par::fill_indexed(&mut out, |flat| {
        let j = flat / sites;
        let cell = flat % sites;
        let mut acc = 0.0;
        for s in &corners {
            let mut idx = cell;
            for axis in 0..d {
                if s[axis] == 1 {
                    idx = grid.shifted(idx, axis, 1);
                }
            }
            acc += if s[j] == 1 { fv[idx] } else { -fv[idx] };
        }
        acc * scale
    });
    VectorField::from_values(grid, out).expect("finite cell gradient")
}

/// Adjoint `Cᵀ`: per-cell vector to nodal scalar, under plain sums (the
/// `N^{-d}` factors cancel between the two sides).
pub fn cell_grad_adjoint(w: &VectorField) -> ScalarField {
    let grid = w.grid();
    let d = grid.d();
    let sites = grid.sites();
    let corners = corners(d);
    let scale = 1.0 / (1usize << (d - 1)) as f64;
    let mut out = vec![0.0; sites];
    par::fill_indexed(&mut out, |node| {
        let mut acc = 0.0;
        for s in &corners {
            // node = cell + s  ⇒  cell = node − s
            let mut cell = node;
            for axis in 0..d {
                if s[axis] == 1 {
                    cell = grid.shifted(cell, axis, -1);
                }
            }
            for j in 0..d {
                let sign = if s[j] == 1 { 1.0 } else { -1.0 };
                acc += sign * w.get(j, cell);
            }
        }
        acc * scale
    });
    ScalarField::from_values(grid, out).expect("finite adjoint")
}

/// Per-cell matrix application `(M v)(cell) = M(cell)·v(cell)`.
fn apply_cell_matrix(m: &MatrixField, v: &VectorField) -> VectorField {
    let grid = v.grid();
    let d = grid.d();
    let sites = grid.sites();
    let mut out = vec![0.0; d * sites];
    par::fill_indexed(&mut out, |flat| {
        let i = flat / sites;
        let cell = flat % sites;
        let mut acc = 0.0;
        for j in 0..d {
            acc += m.get(i, j, cell) * v.get(j, cell);
        }
        acc
    });
    VectorField::from_values(grid, out).expect("finite product")
}

/// Constant-matrix application plus optional per-cell skew part:
/// `(a + E(cell))·v(cell)`.
fn apply_const_plus_skew(a: &[f64], e: Option<&MatrixField>, v: &VectorField) -> VectorField {
    let grid = v.grid();
    let d = grid.d();
    let sites = grid.sites();
    let mut out = vec![0.0; d * sites];
    par::fill_indexed(&mut out, |flat| {
        let i = flat / sites;
        let cell = flat % sites;
        let mut acc = 0.0;
        for j in 0..d {
            let mut coeff = a[i * d + j];
            if let Some(e) = e {
                coeff += e.get(i, j, cell);
            }
            acc += coeff * v.get(j, cell);
        }
        acc
    });
    VectorField::from_values(grid, out).expect("finite product")
}

/// Spectral symbol of the constant-coefficient stiffness `Cᵀ a C`:
/// `λ(k) = G(k)^* a G(k)`, real and nonnegative for symmetric positive `a`.
fn stiffness_symbol(grid: TorusGrid, a: &[f64]) -> Vec<f64> {
    let d = grid.d();
    let sym = ModeSymbol::cell_gradient(grid);
    (0..grid.sites())
        .map(|m| {
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let gi = sym.component(i, m);
                    let gj = sym.component(j, m);
                    acc += a[i * d + j] * (gi.conj() * gj).re;
                }
            }
            acc.max(0.0)
        })
        .collect()
}

/// Checks per-cell symmetry and uniform ellipticity; returns the mean matrix.
fn validate_symmetric_elliptic(a: &MatrixField) -> Result<Vec<f64>, HomogenizeError> {
    let sym_violation = a.max_symmetry_violation();
    if sym_violation > 0.0 {
        return Err(HomogenizeError::NotSymmetric { max_violation: sym_violation });
    }
    let d = a.grid().d();
    let sites = a.grid().sites();
    let mut cell = vec![0.0; d * d];
    for site in 0..sites {
        a.at_site(site, &mut cell);
        let eigs = linalg::sym_eigenvalues(d, &cell);
        if eigs[0] <= 0.0 {
            return Err(HomogenizeError::NonElliptic { site, min_eigenvalue: eigs[0] });
        }
    }
    Ok(a.mean_matrix())
}

/// Effective tensor of the symmetric continuous operator: assembles the cell
/// problem per direction, solves by preconditioned CG, evaluates the discrete
/// energy as the tensor.
pub fn sigma_primal_continuous(
    a: &MatrixField,
    opts: SolveOptions,
) -> Result<(EffectiveTensor, CellSolution), HomogenizeError> {
    let grid = a.grid();
    let d = grid.d();
    let mean_a = validate_symmetric_elliptic(a)?;
    let precond = SpectralPreconditioner::from_symbol(grid, &stiffness_symbol(grid, &mean_a));

    let unit_cell_field = |k: usize| {
        let mut v = VectorField::zeros(grid);
        for val in v.component_mut(k) {
            *val = 1.0;
        }
        v
    };

    let solve_direction = |k: usize| -> Result<(ScalarField, crate::solvers::SolveReport), HomogenizeError> {
        let b_field = cell_grad_adjoint(&apply_cell_matrix(a, &unit_cell_field(k)));
        let b: Vec<f64> = b_field.values().iter().map(|v| -v).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            let f = ScalarField::from_values(grid, x.to_vec()).expect("finite iterate");
            out.copy_from_slice(cell_grad_adjoint(&apply_cell_matrix(a, &cell_grad(&f))).values());
        };
        let (x, report) = cg(
            apply,
            &b,
            remove_mean,
            Some(|f: &[f64], out: &mut [f64]| precond.apply(f, out)),
            None,
            opts,
        )?;
        if !report.converged {
            return Err(HomogenizeError::NotConverged { direction: k, report });
        }
        Ok((ScalarField::from_values(grid, x).expect("finite solution"), report))
    };

    let results: Vec<_> = par::map_indices(d, solve_direction);
    let mut correctors = Vec::with_capacity(d);
    let mut reports = Vec::with_capacity(d);
    for r in results {
        let (f, rep) = r?;
        correctors.push(f);
        reports.push(rep);
    }

    let mut gradients = Vec::with_capacity(d);
    let mut fluxes = Vec::with_capacity(d);
    for (k, f) in correctors.iter().enumerate() {
        let mut p = cell_grad(f);
        p.axpy(1.0, &unit_cell_field(k));
        fluxes.push(apply_cell_matrix(a, &p));
        gradients.push(p);
    }

    let mut sigma = vec![0.0; d * d];
    for j in 0..d {
        for k in 0..d {
            sigma[j * d + k] = gradients[j].inner(&fluxes[k])?;
        }
    }

    let tensor = EffectiveTensor::new(
        grid,
        sigma,
        Provenance::Primal,
        field_digest(a.values(), grid),
        reports.clone(),
    )?;
    Ok((tensor, CellSolution { correctors, fluxes, reports }))
}

/// Non-symmetric flow tensor: cell problem for `a + E(x)` (`a` constant SPD,
/// `E` skew per cell) solved per direction by restarted GMRES; the tensor is
/// the flux average `σ e_k = N^{-d} Σ_cell (a + E)(e_k + ∇ψ_k)`.
pub fn sigma_nonsym(
    a: &[f64],
    e: &MatrixField,
    opts: SolveOptions,
) -> Result<(EffectiveTensor, CellSolution), HomogenizeError> {
    let grid = e.grid();
    let d = grid.d();
    assert_eq!(a.len(), d * d, "a must be d×d row-major");

    let a_sym_violation = linalg::max_abs_diff(a, &linalg::transpose(d, a));
    if a_sym_violation > 0.0 {
        return Err(HomogenizeError::NotSymmetric { max_violation: a_sym_violation });
    }
    let a_eigs = linalg::sym_eigenvalues(d, a);
    if a_eigs[0] <= 0.0 {
        return Err(HomogenizeError::NonElliptic { site: 0, min_eigenvalue: a_eigs[0] });
    }
    let skew_violation = e.max_skew_violation();
    if skew_violation > 0.0 {
        return Err(HomogenizeError::NotSkew { max_violation: skew_violation });
    }

    let precond = SpectralPreconditioner::from_symbol(grid, &stiffness_symbol(grid, a));

    let unit_cell_field = |k: usize| {
        let mut v = VectorField::zeros(grid);
        for val in v.component_mut(k) {
            *val = 1.0;
        }
        v
    };

    let solve_direction = |k: usize| -> Result<(ScalarField, crate::solvers::SolveReport), HomogenizeError> {
        let b_field = cell_grad_adjoint(&apply_const_plus_skew(a, Some(e), &unit_cell_field(k)));
        let b: Vec<f64> = b_field.values().iter().map(|v| -v).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            let f = ScalarField::from_values(grid, x.to_vec()).expect("finite iterate");
            out.copy_from_slice(
                cell_grad_adjoint(&apply_const_plus_skew(a, Some(e), &cell_grad(&f))).values(),
            );
        };
        let (x, report) = gmres_restarted(
            apply,
            &b,
            remove_mean,
            Some(|f: &[f64], out: &mut [f64]| precond.apply(f, out)),
            None,
            30,
            opts,
        )?;
        if !report.converged {
            return Err(HomogenizeError::NotConverged { direction: k, report });
        }
        Ok((ScalarField::from_values(grid, x).expect("finite solution"), report))
    };

    let results: Vec<_> = par::map_indices(d, solve_direction);
    let mut correctors = Vec::with_capacity(d);
    let mut reports = Vec::with_capacity(d);
    for r in results {
        let (f, rep) = r?;
        correctors.push(f);
        reports.push(rep);
    }

    let mut fluxes = Vec::with_capacity(d);
    let mut sigma = vec![0.0; d * d];
    for (k, f) in correctors.iter().enumerate() {
        let mut p = cell_grad(f);
        p.axpy(1.0, &unit_cell_field(k));
        let flux = apply_const_plus_skew(a, Some(e), &p);
        let means = flux.component_means();
        for j in 0..d {
            sigma[j * d + k] = means[j];
        }
        fluxes.push(flux);
    }

    let tensor = EffectiveTensor::new(
        grid,
        sigma,
        Provenance::Nonsym,
        field_digest(e.values(), grid),
        reports.clone(),
    )?;
    Ok((tensor, CellSolution { correctors, fluxes, reports }))
}

/// Documented edge-to-cell averaging map: the diagonal cell coefficient in
/// direction `i` is the average of the conductances of the cell's `2^{d−1}`
/// parallel edges in that direction,
/// `A_ii(cell x) = 2^{-(d−1)} Σ_{s·e_i=0} ξ_i(x+s)`.
pub fn edge_to_cell_matrix(xi: &EdgeConductanceField) -> MatrixField {
    let grid = xi.grid();
    let d = grid.d();
    let corners = corners(d);
    let scale = 1.0 / (1usize << (d - 1)) as f64;
    MatrixField::from_fn(grid, |i, j, x| {
        if i != j {
            return 0.0;
        }
        let mut acc = 0.0;
        for s in &corners {
            if s[i] == 1 {
                continue;
            }
            let mut y = [0i64; 3];
            for axis in 0..d {
                y[axis] = x[axis] + s[axis];
            }
            let site = grid.site_index(&y[..d]);
            acc += xi.vector().get(i, site);
        }
        acc * scale
    })
}

/// Spectral projections for per-cell vector fields against the cell-gradient
/// symbol: the gradient space `{C f}` and its zero-mean orthogonal
/// complement. On even grids the checkerboard modes belong to the complement.
pub struct CellProjector {
    splitter: SpectralSplitter,
}

impl CellProjector {
    pub fn new(grid: TorusGrid) -> Self {
        CellProjector {
            splitter: SpectralSplitter::new(TorusFft::new(grid), ModeSymbol::cell_gradient(grid)),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.splitter.grid()
    }

    /// Projection onto the zero-mean complement of the cell-gradient space.
    pub fn project_complement(&self, x: &mut [f64]) {
        let grid = self.splitter.grid();
        let d = grid.d();
        let sites = grid.sites();
        let planes: Vec<&[f64]> = (0..d).map(|i| &x[i * sites..(i + 1) * sites]).collect();
        let spectrum = self.splitter.analyze(&planes);
        let (_, _, rest) = self.splitter.split(&spectrum);
        let planes = self.splitter.synthesize(rest);
        for (i, p) in planes.into_iter().enumerate() {
            x[i * sites..(i + 1) * sites].copy_from_slice(&p);
        }
    }
}
