//! Primal and dual tensors for the lattice (edge-conductance) medium.

use crate::fft::{ModeSymbol, SpectralSplitter, TorusFft};
use crate::lattice::{grad, grad_adjoint, hadamard, ScalarField, VectorField};
use crate::media::EdgeConductanceField;
use crate::solvers::{cg, remove_mean, SolveOptions, SpectralPreconditioner};
use crate::weyl;
use crate::{linalg, par};

use super::{field_digest, CellSolution, EffectiveTensor, HomogenizeError, Provenance};

/// Basis field `e_k`: component `k` is 1 everywhere.
fn unit_field(grid: crate::lattice::TorusGrid, k: usize) -> VectorField {
    let mut v = VectorField::zeros(grid);
    for val in v.component_mut(k) {
        *val = 1.0;
    }
    v
}

/// Weighted inner product `N^{-d} Σ_x Σ_i w_i(x) u_i(x) v_i(x)`.
fn weighted_inner(w: &VectorField, u: &VectorField, v: &VectorField) -> f64 {
    let mut acc = 0.0;
    for i in 0..w.grid().d() {
        let (wp, up, vp) = (w.component(i), u.component(i), v.component(i));
        let partials: Vec<f64> = (0..wp.len().div_ceil(par::CHUNK))
            .map(|c| {
                let lo = c * par::CHUNK;
                let hi = (lo + par::CHUNK).min(wp.len());
                let mut s = 0.0;
                for m in lo..hi {
                    s += wp[m] * up[m] * vp[m];
                }
                s
            })
            .collect();
        acc += partials.iter().sum::<f64>();
    }
    acc / w.grid().sites() as f64
}

/// Effective tensor by the primal variational formula: for each `l = e_k`
/// solve `∇*(ξ ⊙ (e_k + ∇f_k)) = 0` by preconditioned CG and assemble
/// `σ_jk = N^{-d} Σ_x Σ_i ξ_i (δ_ij + ∇_i f_j)(δ_ik + ∇_i f_k)`.
pub fn sigma_primal_discrete(
    xi: &EdgeConductanceField,
    opts: SolveOptions,
) -> Result<(EffectiveTensor, CellSolution), HomogenizeError> {
    let grid = xi.grid();
    let d = grid.d();
    let precond = SpectralPreconditioner::laplace(grid);

    let solve_direction = |k: usize| -> Result<(ScalarField, crate::solvers::SolveReport), HomogenizeError> {
        let rhs_field = hadamard(xi.vector(), &unit_field(grid, k))?;
        let mut b = grad_adjoint(&rhs_field);
        for v in b.values_mut() {
            *v = -*v;
        }
        let apply = |x: &[f64], out: &mut [f64]| {
            let f = ScalarField::from_values(grid, x.to_vec()).expect("finite iterate");
            let flux = hadamard(xi.vector(), &grad(&f)).expect("same grid");
            out.copy_from_slice(grad_adjoint(&flux).values());
        };
        let (x, report) = cg(
            apply,
            b.values(),
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

    // the d cell solves are independent
    let results: Vec<_> = par::map_indices(d, solve_direction);
    let mut correctors = Vec::with_capacity(d);
    let mut reports = Vec::with_capacity(d);
    for r in results {
        let (f, rep) = r?;
        correctors.push(f);
        reports.push(rep);
    }

    // p_k = e_k + ∇f_k, flux_k = ξ ⊙ p_k
    let mut gradients = Vec::with_capacity(d);
    let mut fluxes = Vec::with_capacity(d);
    for (k, f) in correctors.iter().enumerate() {
        let mut p = grad(f);
        p.axpy(1.0, &unit_field(grid, k));
        fluxes.push(hadamard(xi.vector(), &p)?);
        gradients.push(p);
    }

    let mut sigma = vec![0.0; d * d];
    for j in 0..d {
        for k in 0..d {
            sigma[j * d + k] = weighted_inner(xi.vector(), &gradients[j], &gradients[k]);
        }
    }

    let tensor = EffectiveTensor::new(
        grid,
        sigma,
        Provenance::Primal,
        field_digest(xi.vector().values(), grid),
        reports.clone(),
    )?;
    check_spectrum_bounds(&tensor, xi)?;
    Ok((tensor, CellSolution { correctors, fluxes, reports }))
}

/// For symmetric media the spectrum of σ must sit inside the conductance
/// range (up to solver tolerance).
fn check_spectrum_bounds(
    tensor: &EffectiveTensor,
    xi: &EdgeConductanceField,
) -> Result<(), HomogenizeError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in xi.vector().values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let slack = 1e-8 * hi.max(1.0);
    let eigs = &tensor.sigma_sym_eigenvalues;
    if eigs[0] < lo - slack || eigs[eigs.len() - 1] > hi + slack {
        return Err(HomogenizeError::InvariantViolation(format!(
            "tensor spectrum [{:e}, {:e}] escapes conductance range [{lo:e}, {hi:e}]",
            eigs[0],
            eigs[eigs.len() - 1]
        )));
    }
    Ok(())
}

/// Dual tensor: minimizes `N^{-d} Σ_x Σ_i ξ_i⁻¹ (l_i + v_i)²` over the
/// solenoidal subspace by CG on the projected operator. The returned matrix
/// is the quadratic form of `σ⁻¹` (off-diagonals by polarization).
pub fn sigma_dual_discrete(
    xi: &EdgeConductanceField,
    opts: SolveOptions,
) -> Result<EffectiveTensor, HomogenizeError> {
    let (tensor, _) = dual_solve(xi, opts)?;
    Ok(tensor)
}

/// Dual tensor assembled through explicit stream matrices: the minimizers are
/// re-expressed as `div H` with `H` from the least-norm stream recovery, then
/// the functional is evaluated on those fields. Exercises the skew-matrix
/// parametrization of the solenoidal space end to end.
pub fn sigma_dual_discrete_via_stream(
    xi: &EdgeConductanceField,
    opts: SolveOptions,
) -> Result<EffectiveTensor, HomogenizeError> {
    let (_, minimizers) = dual_solve(xi, opts)?;
    let grid = xi.grid();
    let d = grid.d();
    let inv = xi.reciprocal();
    let mut fields = Vec::with_capacity(d);
    for v in &minimizers {
        let h = weyl::stream_matrix(v, weyl::WeylOptions { ortho_tol: 1e-12, residual_tol: 1e-6 })?;
        fields.push(crate::lattice::skew_div(&h));
    }
    let mut sigma = vec![0.0; d * d];
    for j in 0..d {
        for k in 0..d {
            let mut pj = fields[j].clone();
            pj.axpy(1.0, &unit_field(grid, j));
            let mut pk = fields[k].clone();
            pk.axpy(1.0, &unit_field(grid, k));
            sigma[j * d + k] = weighted_inner(inv.vector(), &pj, &pk);
        }
    }
    EffectiveTensor::new(grid, sigma, Provenance::Dual, field_digest(xi.vector().values(), grid), vec![])
}

fn dual_solve(
    xi: &EdgeConductanceField,
    opts: SolveOptions,
) -> Result<(EffectiveTensor, Vec<VectorField>), HomogenizeError> {
    let grid = xi.grid();
    let d = grid.d();
    let inv = xi.reciprocal();
    let splitter = SpectralSplitter::new(TorusFft::new(grid), ModeSymbol::edge_gradient(grid));

    let project_sol = |x: &mut [f64]| {
        let planes: Vec<&[f64]> =
            (0..d).map(|i| &x[i * grid.sites()..(i + 1) * grid.sites()]).collect();
        let spectrum = splitter.analyze(&planes);
        let (_, _, sol_spec) = splitter.split(&spectrum);
        let planes = splitter.synthesize(sol_spec);
        for (i, p) in planes.into_iter().enumerate() {
            x[i * grid.sites()..(i + 1) * grid.sites()].copy_from_slice(&p);
        }
    };

    let apply = |x: &[f64], out: &mut [f64]| {
        for (o, (v, w)) in out.iter_mut().zip(x.iter().zip(inv.vector().values())) {
            *o = v * w;
        }
        project_sol(out);
    };

    let mut minimizers = Vec::with_capacity(d);
    let mut reports = Vec::with_capacity(d);
    for k in 0..d {
        let mut b: Vec<f64> = hadamard(inv.vector(), &unit_field(grid, k))?
            .values()
            .iter()
            .map(|v| -v)
            .collect();
        project_sol(&mut b);
        let (x, report) = cg(apply, &b, |x: &mut [f64]| project_sol(x), None::<fn(&[f64], &mut [f64])>, None, opts)?;
        if !report.converged {
            return Err(HomogenizeError::NotConverged { direction: k, report });
        }
        minimizers.push(VectorField::from_values(grid, x).expect("finite solution"));
        reports.push(report);
    }

    let mut sigma_inv_form = vec![0.0; d * d];
    for j in 0..d {
        for k in 0..d {
            let mut pj = minimizers[j].clone();
            pj.axpy(1.0, &unit_field(grid, j));
            let mut pk = minimizers[k].clone();
            pk.axpy(1.0, &unit_field(grid, k));
            sigma_inv_form[j * d + k] = weighted_inner(inv.vector(), &pj, &pk);
        }
    }

    // Invariant: the dual form's spectrum must sit inside the reciprocal range.
    let eigs = linalg::sym_eigenvalues(d, &linalg::sym_part(d, &sigma_inv_form));
    let (lo, hi) = xi.bounds();
    let slack = 1e-8 * (1.0 / lo).max(1.0);
    if eigs[0] < 1.0 / hi - slack || eigs[d - 1] > 1.0 / lo + slack {
        return Err(HomogenizeError::InvariantViolation(format!(
            "dual form spectrum [{:e}, {:e}] escapes [{:e}, {:e}]",
            eigs[0],
            eigs[d - 1],
            1.0 / hi,
            1.0 / lo
        )));
    }

    let tensor = EffectiveTensor::new(
        grid,
        sigma_inv_form,
        Provenance::Dual,
        field_digest(xi.vector().values(), grid),
        reports,
    )?;
    Ok((tensor, minimizers))
}
