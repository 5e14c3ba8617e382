//! Effective-tensor oracles: exact laws (constant media, 1D series, laminate),
//! finite-N duality, non-symmetric identities and the polarization functional.

use nalgebra::{DMatrix, DVector};

use perihom_core::homogenize::{
    cell_grad, cell_grad_adjoint, edge_to_cell_matrix, norris_value, sigma_dual_discrete,
    sigma_dual_discrete_via_stream, sigma_from_energy_crosscheck, sigma_nonsym,
    sigma_primal_continuous, sigma_primal_discrete, HomogenizeError,
};
use perihom_core::lattice::{MatrixField, ScalarField, TorusGrid, VectorField};
use perihom_core::linalg;
use perihom_core::media::{
    sample_conductances, sample_matrix_field, EdgeConductanceField, MatrixKind, MediumKind,
    MediumSpec, Seed,
};
use perihom_core::solvers::SolveOptions;

fn two_phase(c: f64) -> MediumSpec {
    MediumSpec::new(MediumKind::IidTwoPhase { t_low: 1.0 / c, t_high: c, p: 0.5 }, c).unwrap()
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    linalg::max_abs_diff(a, b)
}

fn identity(d: usize) -> Vec<f64> {
    linalg::identity(d)
}

#[test]
fn constant_medium_discrete_exact() {
    for (d, n) in [(1usize, 8usize), (2, 4), (3, 4)] {
        let grid = TorusGrid::new(d, n).unwrap();
        let spec = MediumSpec::new(MediumKind::Constant { values: vec![1.7; d] }, 2.0).unwrap();
        let xi = sample_conductances(&spec, Seed::new(1), grid).unwrap();
        let (tensor, sol) = sigma_primal_discrete(&xi, SolveOptions::for_grid(grid)).unwrap();
        let want: Vec<f64> = identity(d).iter().map(|v| 1.7 * v).collect();
        assert!(max_dev(&tensor.sigma, &want) <= 1e-12, "d={d}: {:?}", tensor.sigma);
        for f in &sol.correctors {
            assert!(f.norm() <= 1e-12);
        }
    }
}

#[test]
fn one_dimensional_harmonic_mean_law() {
    // 50 random profiles, N ≤ 64: σ equals the series-resistor harmonic mean
    let spec = MediumSpec::new(MediumKind::IidUniform { lo: 0.25, hi: 4.0 }, 4.0).unwrap();
    for trial in 0..50u64 {
        let n = 4 + (trial as usize * 7) % 61; // sides 4..=64
        let grid = TorusGrid::new(1, n).unwrap();
        let xi = sample_conductances(&spec, Seed::realization(5, trial), grid).unwrap();
        let (tensor, _) = sigma_primal_discrete(&xi, SolveOptions::for_grid(grid)).unwrap();
        let harm =
            (xi.vector().values().iter().map(|v| 1.0 / v).sum::<f64>() / n as f64).recip();
        assert!(
            (tensor.sigma[0] - harm).abs() <= 1e-10 * harm,
            "trial {trial} N={n}: {} vs {harm}",
            tensor.sigma[0]
        );
    }
}

fn laminate_spec(profile_x: &[f64], profile_y: &[f64], c: f64, d: usize) -> MediumSpec {
    let profile: Vec<Vec<f64>> = profile_x
        .iter()
        .zip(profile_y)
        .map(|(a, b)| {
            let mut row = vec![*a, *b];
            row.truncate(d.max(2));
            if d == 3 {
                row.push(*b);
            }
            row
        })
        .collect();
    MediumSpec::new(MediumKind::Laminate { axis: 0, profile }, c).unwrap()
}

#[test]
fn laminate_law_d2_and_d3() {
    // medium varies only along x₁: σ₁₁ harmonic mean of ξ₁, σ₂₂ arithmetic
    // mean of ξ₂, off-diagonals ≤ 1e-10 (reduction-to-1D oracle)
    let px = [0.5, 2.0, 1.0, 3.0];
    let py = [1.5, 0.75, 2.5, 1.0];
    for d in [2usize, 3] {
        let grid = TorusGrid::new(d, 8).unwrap();
        let spec = laminate_spec(&px, &py, 4.0, d);
        let xi = sample_conductances(&spec, Seed::new(1), grid).unwrap();
        let (tensor, _) = sigma_primal_discrete(&xi, SolveOptions::for_grid(grid)).unwrap();
        let harm = px.len() as f64 / px.iter().map(|v| 1.0 / v).sum::<f64>();
        let arith = py.iter().sum::<f64>() / py.len() as f64;
        assert!((tensor.entry(0, 0) - harm).abs() <= 1e-10 * harm, "d={d} σ11");
        assert!((tensor.entry(1, 1) - arith).abs() <= 1e-10 * arith, "d={d} σ22");
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    assert!(tensor.entry(i, j).abs() <= 1e-10, "d={d} off-diagonal");
                }
            }
        }
    }
}

/// Dense primal oracle: assemble the weighted graph Laplacian, solve by LU,
/// evaluate the energy form. Independent of the CG/FFT path.
fn dense_sigma_primal(xi: &EdgeConductanceField) -> Vec<f64> {
    let grid = xi.grid();
    let d = grid.d();
    let sites = grid.sites();
    let mut lap = DMatrix::zeros(sites, sites);
    for site in 0..sites {
        for i in 0..d {
            let up = grid.shifted(site, i, 1);
            let w = xi.vector().get(i, site);
            lap[(site, site)] += w;
            lap[(up, up)] += w;
            lap[(site, up)] -= w;
            lap[(up, site)] -= w;
        }
    }
    let lap = lap + DMatrix::from_element(sites, sites, 1.0);
    let lu = lap.lu();
    let mut correctors = Vec::new();
    for k in 0..d {
        let mut b = DVector::zeros(sites);
        for site in 0..sites {
            let w_up = xi.vector().get(k, site);
            let dn = grid.shifted(site, k, -1);
            let w_dn = xi.vector().get(k, dn);
            // −∇*(ξ e_k) at site: −(ξ_k(x−e_k) − ξ_k(x))
            b[site] = -(w_dn - w_up);
        }
        correctors.push(lu.solve(&b).unwrap());
    }
    let mut sigma = vec![0.0; d * d];
    for j in 0..d {
        for k in 0..d {
            let mut acc = 0.0;
            for site in 0..sites {
                for i in 0..d {
                    let up = grid.shifted(site, i, 1);
                    let pj = if i == j { 1.0 } else { 0.0 } + correctors[j][up] - correctors[j][site];
                    let pk = if i == k { 1.0 } else { 0.0 } + correctors[k][up] - correctors[k][site];
                    acc += xi.vector().get(i, site) * pj * pk;
                }
            }
            sigma[j * d + k] = acc / sites as f64;
        }
    }
    sigma
}

#[test]
fn primal_matches_dense_oracle_small_grids() {
    for (d, n) in [(2usize, 4usize), (2, 6), (3, 3)] {
        let grid = TorusGrid::new(d, n).unwrap();
        let xi = sample_conductances(&two_phase(3.0), Seed::realization(21, n as u64), grid)
            .unwrap();
        let (tensor, _) =
            sigma_primal_discrete(&xi, SolveOptions::for_grid(grid).with_tol(1e-12)).unwrap();
        let dense = dense_sigma_primal(&xi);
        assert!(
            max_dev(&tensor.sigma, &dense) <= 1e-9,
            "d={d} N={n}: {:?} vs {:?}",
            tensor.sigma,
            dense
        );
    }
}

#[test]
fn dual_constant_medium_exact() {
    let grid = TorusGrid::new(2, 4).unwrap();
    let spec = MediumSpec::new(MediumKind::Constant { values: vec![2.5, 2.5] }, 2.5).unwrap();
    let xi = sample_conductances(&spec, Seed::new(1), grid).unwrap();
    let dual = sigma_dual_discrete(&xi, SolveOptions::for_grid(grid)).unwrap();
    let want: Vec<f64> = identity(2).iter().map(|v| v / 2.5).collect();
    assert!(max_dev(&dual.sigma, &want) <= 1e-12);
}

#[test]
fn dual_one_dimensional_is_arithmetic_mean_of_reciprocals() {
    let spec = MediumSpec::new(MediumKind::IidUniform { lo: 0.25, hi: 4.0 }, 4.0).unwrap();
    let grid = TorusGrid::new(1, 32).unwrap();
    let xi = sample_conductances(&spec, Seed::new(9), grid).unwrap();
    let dual = sigma_dual_discrete(&xi, SolveOptions::for_grid(grid)).unwrap();
    let arith_recip =
        xi.vector().values().iter().map(|v| 1.0 / v).sum::<f64>() / grid.sites() as f64;
    assert!((dual.sigma[0] - arith_recip).abs() <= 1e-10 * arith_recip);
}

#[test]
fn finite_n_duality_primal_times_dual_is_identity() {
    // the flagship self-test: σ_primal · σ_dual = I to 1e-8
    for (d, n, trials) in [(2usize, 8usize, 6u64), (3, 4, 3)] {
        let grid = TorusGrid::new(d, n).unwrap();
        for trial in 0..trials {
            let xi =
                sample_conductances(&two_phase(3.0), Seed::realization(31, trial), grid).unwrap();
            let opts = SolveOptions::for_grid(grid);
            let (primal, _) = sigma_primal_discrete(&xi, opts).unwrap();
            let dual = sigma_dual_discrete(&xi, opts).unwrap();
            let prod = linalg::mat_mul(d, &primal.sigma, &dual.sigma);
            let dev = max_dev(&prod, &identity(d));
            assert!(dev <= 1e-8, "d={d} trial {trial}: ‖σσ⁻¹ − I‖ = {dev:e}");
        }
    }
}

#[test]
fn dual_via_stream_matrices_agrees_with_projected_route() {
    let grid = TorusGrid::new(2, 6).unwrap();
    let xi = sample_conductances(&two_phase(2.0), Seed::new(77), grid).unwrap();
    let opts = SolveOptions::for_grid(grid);
    let a = sigma_dual_discrete(&xi, opts).unwrap();
    let b = sigma_dual_discrete_via_stream(&xi, opts).unwrap();
    assert!(max_dev(&a.sigma, &b.sigma) <= 1e-8, "{:?} vs {:?}", a.sigma, b.sigma);
}

#[test]
fn voigt_reuss_sandwich() {
    let grid = TorusGrid::new(2, 8).unwrap();
    for trial in 0..20u64 {
        let xi = sample_conductances(&two_phase(4.0), Seed::realization(41, trial), grid).unwrap();
        let (tensor, _) = sigma_primal_discrete(&xi, SolveOptions::for_grid(grid)).unwrap();
        for k in 0..2 {
            let comp = xi.vector().component(k);
            let arith = comp.iter().sum::<f64>() / comp.len() as f64;
            let harm = comp.len() as f64 / comp.iter().map(|v| 1.0 / v).sum::<f64>();
            let s = tensor.entry(k, k);
            assert!(s <= arith + 1e-10 && s >= harm - 1e-10, "trial {trial} dir {k}");
        }
    }
}

#[test]
fn monotonicity_in_the_medium() {
    // pointwise ξ ≤ ξ′ ⇒ σ(ξ) ≼ σ(ξ′)
    let grid = TorusGrid::new(2, 8).unwrap();
    for trial in 0..10u64 {
        let xi = sample_conductances(&two_phase(3.0), Seed::realization(51, trial), grid).unwrap();
        let bump = sample_conductances(
            &MediumSpec::new(MediumKind::IidUniform { lo: 1.0, hi: 2.0 }, 2.0).unwrap(),
            Seed::realization(52, trial),
            grid,
        )
        .unwrap();
        let raised = VectorField::from_values(
            grid,
            xi.vector()
                .values()
                .iter()
                .zip(bump.vector().values())
                .map(|(a, b)| a + (b - 1.0))
                .collect(),
        )
        .unwrap();
        let xi_up = EdgeConductanceField::new(raised, xi.bounds().0, xi.bounds().1 + 1.0).unwrap();
        let opts = SolveOptions::for_grid(grid);
        let (lo, _) = sigma_primal_discrete(&xi, opts).unwrap();
        let (hi, _) = sigma_primal_discrete(&xi_up, opts).unwrap();
        let diff: Vec<f64> = hi.sigma.iter().zip(&lo.sigma).map(|(a, b)| a - b).collect();
        let eigs = linalg::sym_eigenvalues(2, &linalg::sym_part(2, &diff));
        assert!(eigs[0] >= -1e-10, "trial {trial}: min eig {}", eigs[0]);
    }
}

#[test]
fn scaling_equivariance() {
    let grid = TorusGrid::new(2, 8).unwrap();
    let xi = sample_conductances(&two_phase(2.0), Seed::new(61), grid).unwrap();
    let opts = SolveOptions::for_grid(grid);
    let (base, _) = sigma_primal_discrete(&xi, opts).unwrap();
    for lambda in [2.0f64, 3.0] {
        let scaled = VectorField::from_values(
            grid,
            xi.vector().values().iter().map(|v| lambda * v).collect(),
        )
        .unwrap();
        let xi_s =
            EdgeConductanceField::new(scaled, lambda * xi.bounds().0, lambda * xi.bounds().1)
                .unwrap();
        let (t, _) = sigma_primal_discrete(&xi_s, opts).unwrap();
        let want: Vec<f64> = base.sigma.iter().map(|v| lambda * v).collect();
        assert!(max_dev(&t.sigma, &want) <= 1e-12 * lambda, "λ={lambda}");
    }
}

#[test]
fn lattice_symmetry_under_coordinate_permutation() {
    // swapping the two axes of the medium swaps the tensor accordingly
    let grid = TorusGrid::new(2, 6).unwrap();
    let xi = sample_conductances(&two_phase(3.0), Seed::new(71), grid).unwrap();
    let permuted = VectorField::from_fn(grid, |comp, x| {
        let swapped = [x[1], x[0]];
        xi.vector().get(1 - comp, grid.site_index(&swapped))
    });
    let xi_p = EdgeConductanceField::new(permuted, xi.bounds().0, xi.bounds().1).unwrap();
    let opts = SolveOptions::for_grid(grid);
    let (a, _) = sigma_primal_discrete(&xi, opts).unwrap();
    let (b, _) = sigma_primal_discrete(&xi_p, opts).unwrap();
    // b = P a Pᵀ with P the swap
    assert!((a.entry(0, 0) - b.entry(1, 1)).abs() <= 1e-9);
    assert!((a.entry(1, 1) - b.entry(0, 0)).abs() <= 1e-9);
    assert!((a.entry(0, 1) - b.entry(1, 0)).abs() <= 1e-9);
}

#[test]
fn flux_crosscheck_constant_laminate_random() {
    let opts = SolveOptions::for_grid(TorusGrid::new(2, 8).unwrap());
    // constant: both paths give c₀ I exactly
    let grid = TorusGrid::new(2, 8).unwrap();
    let cspec = MediumSpec::new(MediumKind::Constant { values: vec![1.3, 1.3] }, 2.0).unwrap();
    let xi = sample_conductances(&cspec, Seed::new(1), grid).unwrap();
    let (tensor, sol) = sigma_primal_discrete(&xi, opts).unwrap();
    let flux_tensor = sigma_from_energy_crosscheck(&sol, &tensor, 1e-10).unwrap();
    assert!(max_dev(&flux_tensor.sigma, &tensor.sigma) <= 1e-12);

    // laminate to 1e-10
    let spec = laminate_spec(&[0.5, 2.0], &[1.0, 1.5], 2.0, 2);
    let xi = sample_conductances(&spec, Seed::new(2), grid).unwrap();
    let (tensor, sol) = sigma_primal_discrete(&xi, opts).unwrap();
    sigma_from_energy_crosscheck(&sol, &tensor, 1e-10).unwrap();

    // random d=3, N=8 to 1e-8
    let grid3 = TorusGrid::new(3, 8).unwrap();
    let xi = sample_conductances(&two_phase(3.0), Seed::new(3), grid3).unwrap();
    let (tensor, sol) = sigma_primal_discrete(&xi, SolveOptions::for_grid(grid3)).unwrap();
    sigma_from_energy_crosscheck(&sol, &tensor, 1e-8).unwrap();

    // a corrupted solution trips the mismatch flag
    let mut bad = sol;
    for f in bad.fluxes.iter_mut() {
        for v in f.component_mut(0) {
            *v += 0.01;
        }
    }
    assert!(matches!(
        sigma_from_energy_crosscheck(&bad, &tensor, 1e-8),
        Err(HomogenizeError::AssemblyMismatch { .. })
    ));
}

// ------------------------- continuous (cell) route -------------------------

#[test]
fn cell_grad_adjoint_consistency() {
    let grid = TorusGrid::new(2, 6).unwrap();
    let mut f = ScalarField::zeros(grid);
    let mut w = VectorField::zeros(grid);
    let mut state = 123u64;
    let mut fill = |vals: &mut [f64]| {
        for v in vals.iter_mut() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            *v = (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0;
        }
    };
    fill(f.values_mut());
    fill(w.values_mut());
    let lhs: f64 =
        cell_grad(&f).values().iter().zip(w.values()).map(|(a, b)| a * b).sum();
    let rhs: f64 =
        f.values().iter().zip(cell_grad_adjoint(&w).values()).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
}

#[test]
fn constant_matrix_continuous_exact() {
    for d in [1usize, 2, 3] {
        let grid = TorusGrid::new(d, 4).unwrap();
        // constant full symmetric matrix with off-diagonal coupling for d ≥ 2
        let a = MatrixField::from_fn(grid, |i, j, _| {
            if i == j {
                2.0
            } else {
                0.3
            }
        });
        let (tensor, _) = sigma_primal_continuous(&a, SolveOptions::for_grid(grid)).unwrap();
        let want = MatrixField::from_fn(grid, |_, _, _| 0.0); // placeholder, compare directly
        drop(want);
        let mut expect = vec![0.3; d * d];
        for i in 0..d {
            expect[i * d + i] = 2.0;
        }
        assert!(max_dev(&tensor.sigma, &expect) <= 1e-12, "d={d}: {:?}", tensor.sigma);
    }
}

#[test]
fn continuous_laminate_means() {
    // diagonal A varying only in x₁: σ₁₁/σ₂₂ = harmonic/arithmetic means
    let grid = TorusGrid::new(2, 8).unwrap();
    let ax = [0.5, 2.0, 1.0, 4.0];
    let ay = [1.5, 0.75, 2.5, 1.0];
    let a = MatrixField::from_fn(grid, |i, j, x| {
        if i != j {
            return 0.0;
        }
        let layer = (x[0].rem_euclid(4)) as usize;
        if i == 0 {
            ax[layer]
        } else {
            ay[layer]
        }
    });
    let (tensor, _) =
        sigma_primal_continuous(&a, SolveOptions::for_grid(grid).with_tol(1e-12)).unwrap();
    let harm = ax.len() as f64 / ax.iter().map(|v| 1.0 / v).sum::<f64>();
    let arith = ay.iter().sum::<f64>() / ay.len() as f64;
    assert!((tensor.entry(0, 0) - harm).abs() <= 1e-10 * harm, "{}", tensor.entry(0, 0));
    assert!((tensor.entry(1, 1) - arith).abs() <= 1e-10 * arith);
    assert!(tensor.entry(0, 1).abs() <= 1e-10);
}

#[test]
fn continuous_rejects_non_elliptic() {
    let grid = TorusGrid::new(2, 4).unwrap();
    let mut a = MatrixField::from_fn(grid, |i, j, _| if i == j { 1.0 } else { 0.0 });
    a.set(0, 0, 3, -0.5);
    assert!(matches!(
        sigma_primal_continuous(&a, SolveOptions::for_grid(grid)),
        Err(HomogenizeError::NonElliptic { .. })
    ));
}

#[test]
fn discrete_and_continuous_agree_on_smooth_medium() {
    // a smooth deterministic profile sampled at edge midpoints, carried to
    // cells by the documented averaging map; consistency within 5% at N=32
    // and shrinking at N=64
    let profile = |u: f64, v: f64, comp: usize| -> f64 {
        let base = 1.5 + 0.5 * (2.0 * std::f64::consts::PI * u).sin();
        let cross = 0.25 * (2.0 * std::f64::consts::PI * v).cos();
        if comp == 0 {
            base + cross
        } else {
            base - cross
        }
    };
    let mut deviations = Vec::new();
    for n in [32usize, 64] {
        let grid = TorusGrid::new(2, n).unwrap();
        let edge = VectorField::from_fn(grid, |comp, x| {
            // conductance lives at the edge midpoint x + e_comp/2
            let mut u = [x[0] as f64, x[1] as f64];
            u[comp] += 0.5;
            profile(u[0] / n as f64, u[1] / n as f64, comp)
        });
        let xi = EdgeConductanceField::new(edge, 0.5, 3.0).unwrap();
        let (disc, _) = sigma_primal_discrete(&xi, SolveOptions::for_grid(grid)).unwrap();
        let a = edge_to_cell_matrix(&xi);
        let (cont, _) = sigma_primal_continuous(&a, SolveOptions::for_grid(grid)).unwrap();
        let dev = max_dev(&disc.sigma, &cont.sigma)
            / disc.sigma.iter().cloned().fold(0.0f64, f64::max);
        deviations.push(dev);
    }
    assert!(deviations[0] <= 0.05, "N=32 deviation {}", deviations[0]);
    assert!(deviations[1] < deviations[0], "consistency must shrink: {deviations:?}");
}

// ------------------------------- nonsym route ------------------------------

fn skew_field(grid: TorusGrid, amplitude: f64, seed: u64) -> MatrixField {
    let spec = MediumSpec::new(
        MediumKind::IidUniform { lo: 1.0 / (1.0 + 2.0 * amplitude), hi: 1.0 + 2.0 * amplitude },
        1.0 + 2.0 * amplitude,
    )
    .unwrap();
    sample_matrix_field(&spec, Seed::new(seed), grid, MatrixKind::Skew).unwrap()
}

#[test]
fn nonsym_zero_skew_returns_a() {
    let grid = TorusGrid::new(2, 4).unwrap();
    let a = vec![2.0, 0.4, 0.4, 1.5];
    let e = MatrixField::zeros(grid);
    let (tensor, _) = sigma_nonsym(&a, &e, SolveOptions::for_grid(grid)).unwrap();
    assert!(max_dev(&tensor.sigma, &a) <= 1e-12);
}

#[test]
fn nonsym_transpose_relation() {
    // σ(a, −E) = ᵗσ(a, E) to 1e-8, against an independent dense solve as well
    let grid = TorusGrid::new(2, 8).unwrap();
    let a = vec![1.5, 0.2, 0.2, 1.0];
    let e = skew_field(grid, 0.4, 3);
    let minus_e = MatrixField::from_fn(grid, |i, j, x| {
        -e.get(i, j, grid.site_index(&[x[0], x[1]]))
    });
    let opts = SolveOptions::for_grid(grid).with_tol(1e-12);
    let (t_plus, _) = sigma_nonsym(&a, &e, opts).unwrap();
    let (t_minus, _) = sigma_nonsym(&a, &minus_e, opts).unwrap();
    let transposed = linalg::transpose(2, &t_plus.sigma);
    assert!(
        max_dev(&t_minus.sigma, &transposed) <= 1e-8,
        "{:?} vs {:?}",
        t_minus.sigma,
        transposed
    );
    // genuinely non-symmetric
    assert!(t_plus.asymmetry() > 1e-6, "asymmetry {}", t_plus.asymmetry());
}

#[test]
fn nonsym_matches_dense_solve() {
    let grid = TorusGrid::new(2, 4).unwrap();
    let sites = grid.sites();
    let a = vec![1.2, 0.0, 0.0, 0.9];
    let e = skew_field(grid, 0.5, 9);
    let opts = SolveOptions::for_grid(grid).with_tol(1e-12);
    let (tensor, _) = sigma_nonsym(&a, &e, opts).unwrap();

    // dense assembly of f ↦ Cᵀ((a+E)Cf) and the two right-hand sides
    let apply = |x: &[f64]| -> Vec<f64> {
        let f = ScalarField::from_values(grid, x.to_vec()).unwrap();
        let g = cell_grad(&f);
        let mut prod = VectorField::zeros(grid);
        for i in 0..2 {
            for cell in 0..sites {
                let mut acc = 0.0;
                for j in 0..2 {
                    acc += (a[i * 2 + j] + e.get(i, j, cell)) * g.get(j, cell);
                }
                prod.set(i, cell, acc);
            }
        }
        cell_grad_adjoint(&prod).values().to_vec()
    };
    let mut dense = DMatrix::zeros(sites, sites);
    for col in 0..sites {
        let mut unit = vec![0.0; sites];
        unit[col] = 1.0;
        let img = apply(&unit);
        for row in 0..sites {
            dense[(row, col)] = img[row];
        }
    }
    // complete the kernel (constants + checkerboard) by penalization
    let mut penal = DMatrix::from_element(sites, sites, 1.0);
    for r in 0..sites {
        let mut xr = [0i64; 2];
        grid.coords(r, &mut xr);
        for c in 0..sites {
            let mut xc = [0i64; 2];
            grid.coords(c, &mut xc);
            let sr = if (xr[0] + xr[1]) % 2 == 0 { 1.0 } else { -1.0 };
            let sc = if (xc[0] + xc[1]) % 2 == 0 { 1.0 } else { -1.0 };
            penal[(r, c)] += sr * sc;
        }
    }
    let dense = dense + penal;

    let mut sigma_dense = vec![0.0; 4];
    for k in 0..2 {
        let mut unit = VectorField::zeros(grid);
        for v in unit.component_mut(k) {
            *v = 1.0;
        }
        let mut rhs_field = VectorField::zeros(grid);
        for i in 0..2 {
            for cell in 0..sites {
                let mut acc = 0.0;
                for j in 0..2 {
                    acc += (a[i * 2 + j] + e.get(i, j, cell)) * unit.get(j, cell);
                }
                rhs_field.set(i, cell, acc);
            }
        }
        let rhs: Vec<f64> = cell_grad_adjoint(&rhs_field).values().iter().map(|v| -v).collect();
        let psi = dense.clone().lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
        let psi_f = ScalarField::from_values(grid, psi.iter().cloned().collect()).unwrap();
        let mut p = cell_grad(&psi_f);
        p.axpy(1.0, &unit);
        for i in 0..2 {
            let mut acc = 0.0;
            for cell in 0..sites {
                for j in 0..2 {
                    acc += (a[i * 2 + j] + e.get(i, j, cell)) * p.get(j, cell);
                }
            }
            sigma_dense[i * 2 + k] = acc / sites as f64;
        }
    }
    assert!(
        max_dev(&tensor.sigma, &sigma_dense) <= 1e-8,
        "{:?} vs {:?}",
        tensor.sigma,
        sigma_dense
    );
}

#[test]
fn nonsym_psd_bounds_and_diffusivity() {
    // a ≼ σ_sym ≼ a + avg(ᵗE a⁻¹ E), slack ≥ −1e-10; D = 2σ_sym
    let grid = TorusGrid::new(2, 8).unwrap();
    let a = vec![1.4, 0.3, 0.3, 1.1];
    let a_inv = linalg::inverse(2, &a).unwrap();
    let e = skew_field(grid, 0.6, 13);
    let (tensor, _) = sigma_nonsym(&a, &e, SolveOptions::for_grid(grid)).unwrap();
    let sym = tensor.sym();

    let lower: Vec<f64> = sym.iter().zip(&a).map(|(s, aa)| s - aa).collect();
    let eigs = linalg::sym_eigenvalues(2, &lower);
    assert!(eigs[0] >= -1e-10, "lower bound slack {}", eigs[0]);

    // avg(ᵗE a⁻¹ E) over cells
    let mut bound = a.clone();
    let sites = grid.sites();
    for cell in 0..sites {
        let mut ecell = vec![0.0; 4];
        e.at_site(cell, &mut ecell);
        let t = linalg::mat_mul(2, &linalg::transpose(2, &ecell), &linalg::mat_mul(2, &a_inv, &ecell));
        for (b, t) in bound.iter_mut().zip(&t) {
            *b += t / sites as f64;
        }
    }
    let upper: Vec<f64> = bound.iter().zip(&sym).map(|(b, s)| b - s).collect();
    let eigs = linalg::sym_eigenvalues(2, &upper);
    assert!(eigs[0] >= -1e-10, "upper bound slack {}", eigs[0]);

    // D = 2σ_sym as an identity on returned values
    let dmat = tensor.diffusivity();
    for (dv, sv) in dmat.iter().zip(&sym) {
        assert_eq!(*dv, 2.0 * *sv);
    }
}

#[test]
fn nonsym_rejects_bad_inputs() {
    let grid = TorusGrid::new(2, 4).unwrap();
    let e = MatrixField::from_fn(grid, |i, j, _| if i != j { 0.5 } else { 0.0 }); // not skew
    assert!(matches!(
        sigma_nonsym(&[1.0, 0.0, 0.0, 1.0], &e, SolveOptions::for_grid(grid)),
        Err(HomogenizeError::NotSkew { .. })
    ));
    let ok_e = MatrixField::zeros(grid);
    assert!(matches!(
        sigma_nonsym(&[-1.0, 0.0, 0.0, 1.0], &ok_e, SolveOptions::for_grid(grid)),
        Err(HomogenizeError::NonElliptic { .. })
    ));
}

// ----------------------------- polarization --------------------------------

#[test]
fn norris_value_vanishes_at_xi_equals_sigma_l() {
    let grid = TorusGrid::new(2, 6).unwrap();
    let a = vec![1.3, 0.2, 0.2, 1.0];
    let e = skew_field(grid, 0.5, 23);
    let opts = SolveOptions::for_grid(grid).with_tol(1e-12);
    let (tensor, _) = sigma_nonsym(&a, &e, opts).unwrap();
    let l = [1.0, -0.5];
    let mut xi = [0.0; 2];
    linalg::mat_vec(2, &tensor.sigma, &l, &mut xi);
    let (value, rep) = norris_value(&a, &e, &xi, &l, opts).unwrap();
    assert!(rep.converged);
    assert!(value <= 1e-6, "value {value:e}");
}

#[test]
fn norris_identity_general_arguments() {
    // value equals ᵗ(ξ−σl) σ_sym⁻¹ (ξ−σl) from the assembled tensor, 1e-6 rel
    for n in [5usize, 8] {
        let grid = TorusGrid::new(2, n).unwrap();
        let a = vec![1.5, 0.25, 0.25, 0.9];
        let e = skew_field(grid, 0.5, 100 + n as u64);
        let opts = SolveOptions::for_grid(grid).with_tol(1e-12);
        let (tensor, _) = sigma_nonsym(&a, &e, opts).unwrap();
        let l = [0.7, 1.1];
        let xi = [-0.3, 0.8];
        let mut sl = [0.0; 2];
        linalg::mat_vec(2, &tensor.sigma, &l, &mut sl);
        let diff = [xi[0] - sl[0], xi[1] - sl[1]];
        let sym_inv = linalg::inverse(2, &tensor.sym()).unwrap();
        let mut tmp = [0.0; 2];
        linalg::mat_vec(2, &sym_inv, &diff, &mut tmp);
        let expect = diff[0] * tmp[0] + diff[1] * tmp[1];

        let (value, rep) = norris_value(&a, &e, &xi, &l, opts).unwrap();
        assert!(rep.converged);
        assert!(
            (value - expect).abs() <= 1e-6 * expect.max(1e-12),
            "N={n}: {value} vs {expect}"
        );
    }
}

#[test]
fn norris_zero_skew_recovers_inverse_quadratic_form() {
    // E ≡ 0, l = e₁, ξ = 0: the value is the e₁ quadratic form of σ_sym
    // (consistent with the primal tensor of the same discretization)
    let grid = TorusGrid::new(2, 6).unwrap();
    let a = vec![1.2, 0.0, 0.0, 0.8];
    let e = MatrixField::zeros(grid);
    let opts = SolveOptions::for_grid(grid).with_tol(1e-12);
    let (value, _) = norris_value(&a, &e, &[0.0, 0.0], &[1.0, 0.0], opts).unwrap();
    // with E = 0 and constant a the corrector vanishes: σ = a, and the value
    // is ᵗ(σ e₁) σ⁻¹ (σ e₁) = a₁₁
    assert!((value - 1.2).abs() <= 1e-6, "value {value}");
}
