//! Built-in invariant suite behind `perihom selftest`: quick desk-scale
//! versions of the library's exact identities, one pass/fail line each.

use perihom_core::homogenize::{
    norris_value, sigma_dual_discrete, sigma_nonsym, sigma_primal_continuous,
    sigma_primal_discrete,
};
use perihom_core::lattice::{grad, grad_adjoint, skew_div, ScalarField, SkewMatrixField, TorusGrid, VectorField};
use perihom_core::linalg;
use perihom_core::media::{
    sample_conductances, sample_matrix_field, MatrixKind, MediumKind, MediumSpec, Seed,
};
use perihom_core::solvers::SolveOptions;
use perihom_core::weyl::{decompose, scalar_potential, stream_matrix, WeylOptions};

type Check = (&'static str, fn() -> Result<(), String>);

fn fill(vals: &mut [f64], salt: u64) {
    let mut state = salt.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    for v in vals.iter_mut() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        *v = (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0;
    }
}

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn two_phase() -> MediumSpec {
    MediumSpec::new(MediumKind::IidTwoPhase { t_low: 0.5, t_high: 2.0, p: 0.5 }, 2.0).unwrap()
}

fn adjointness() -> Result<(), String> {
    let grid = TorusGrid::new(2, 8).unwrap();
    let mut f = ScalarField::zeros(grid);
    let mut v = VectorField::zeros(grid);
    fill(f.values_mut(), 1);
    fill(v.values_mut(), 2);
    let lhs = grad(&f).inner(&v).unwrap();
    let rhs = f.inner(&grad_adjoint(&v)).unwrap();
    ensure((lhs - rhs).abs() <= 1e-13 * (f.norm() * v.norm()).max(1.0), format!("⟨∇f,v⟩ = {lhs} vs ⟨f,∇*v⟩ = {rhs}"))
}

fn div_skew_orthogonality() -> Result<(), String> {
    let grid = TorusGrid::new(3, 4).unwrap();
    let mut h = SkewMatrixField::zeros(grid);
    for p in 0..h.pair_count() {
        fill(h.pair_plane_mut(p), 3 + p as u64);
    }
    let out = grad_adjoint(&skew_div(&h));
    ensure(out.norm() <= 1e-13 * h.norm().max(1.0), format!("‖∇*(div H)‖ = {:e}", out.norm()))
}

fn weyl_parseval_roundtrip() -> Result<(), String> {
    for d in 1..=3usize {
        let grid = TorusGrid::new(d, 6).unwrap();
        let mut v = VectorField::zeros(grid);
        fill(v.values_mut(), 10 + d as u64);
        let split = decompose(&v);
        let vn = v.norm();
        if (split.parseval_norm() - vn).abs() > 1e-12 * vn.max(1.0) {
            return Err(format!("d={d}: Parseval off by {:e}", (split.parseval_norm() - vn).abs()));
        }
        if d >= 2 {
            let f = scalar_potential(&split.potential, WeylOptions::default())
                .map_err(|e| e.to_string())?;
            let mut diff = grad(&f);
            diff.axpy(-1.0, &split.potential);
            if diff.norm() > 1e-10 * vn.max(1.0) {
                return Err(format!("d={d}: potential round trip residual {:e}", diff.norm()));
            }
            let h = stream_matrix(&split.solenoidal, WeylOptions::default())
                .map_err(|e| e.to_string())?;
            let mut back = skew_div(&h);
            back.axpy(-1.0, &split.solenoidal);
            if back.norm() > 1e-10 * vn.max(1.0) {
                return Err(format!("d={d}: stream round trip residual {:e}", back.norm()));
            }
        }
    }
    Ok(())
}

fn constant_media_exact() -> Result<(), String> {
    let grid = TorusGrid::new(2, 4).unwrap();
    let spec = MediumSpec::new(MediumKind::Constant { values: vec![1.6, 1.6] }, 2.0).unwrap();
    let xi = sample_conductances(&spec, Seed::new(1), grid).unwrap();
    let opts = SolveOptions::for_grid(grid);
    let (t, _) = sigma_primal_discrete(&xi, opts).map_err(|e| e.to_string())?;
    let want = [1.6, 0.0, 0.0, 1.6];
    ensure(
        linalg::max_abs_diff(&t.sigma, &want) <= 1e-12,
        format!("discrete σ = {:?}", t.sigma),
    )?;
    let a = sample_matrix_field(&spec, Seed::new(1), grid, MatrixKind::Symmetric).unwrap();
    let (t, _) = sigma_primal_continuous(&a, opts).map_err(|e| e.to_string())?;
    ensure(
        linalg::max_abs_diff(&t.sigma, &want) <= 1e-12,
        format!("continuous σ = {:?}", t.sigma),
    )?;
    let e = perihom_core::lattice::MatrixField::zeros(grid);
    let am = vec![1.3, 0.2, 0.2, 1.0];
    let (t, _) = sigma_nonsym(&am, &e, opts).map_err(|e| e.to_string())?;
    ensure(linalg::max_abs_diff(&t.sigma, &am) <= 1e-12, format!("nonsym σ = {:?}", t.sigma))
}

fn one_dimensional_harmonic() -> Result<(), String> {
    let grid = TorusGrid::new(1, 16).unwrap();
    let spec = MediumSpec::new(MediumKind::IidUniform { lo: 0.25, hi: 4.0 }, 4.0).unwrap();
    let xi = sample_conductances(&spec, Seed::new(5), grid).unwrap();
    let (t, _) =
        sigma_primal_discrete(&xi, SolveOptions::for_grid(grid)).map_err(|e| e.to_string())?;
    let harm = (xi.vector().values().iter().map(|v| 1.0 / v).sum::<f64>() / 16.0).recip();
    ensure((t.sigma[0] - harm).abs() <= 1e-10 * harm, format!("σ = {} vs harmonic {harm}", t.sigma[0]))
}

fn laminate_means() -> Result<(), String> {
    let spec = MediumSpec::new(
        MediumKind::Laminate { axis: 0, profile: vec![vec![0.5, 1.5], vec![2.0, 1.0]] },
        2.0,
    )
    .unwrap();
    let grid = TorusGrid::new(2, 8).unwrap();
    let xi = sample_conductances(&spec, Seed::new(1), grid).unwrap();
    let (t, _) =
        sigma_primal_discrete(&xi, SolveOptions::for_grid(grid)).map_err(|e| e.to_string())?;
    let harm = 2.0 / (1.0 / 0.5 + 1.0 / 2.0);
    let arith = (1.5 + 1.0) / 2.0;
    ensure(
        (t.entry(0, 0) - harm).abs() <= 1e-10 && (t.entry(1, 1) - arith).abs() <= 1e-10,
        format!("laminate σ = {:?}", t.sigma),
    )
}

fn duality() -> Result<(), String> {
    let grid = TorusGrid::new(2, 6).unwrap();
    let xi = sample_conductances(&two_phase(), Seed::new(7), grid).unwrap();
    let opts = SolveOptions::for_grid(grid);
    let (p, _) = sigma_primal_discrete(&xi, opts).map_err(|e| e.to_string())?;
    let dinv = sigma_dual_discrete(&xi, opts).map_err(|e| e.to_string())?;
    let prod = linalg::mat_mul(2, &p.sigma, &dinv.sigma);
    let dev = linalg::max_abs_diff(&prod, &linalg::identity(2));
    ensure(dev <= 1e-8, format!("‖σ·σ⁻¹ − I‖ = {dev:e}"))
}

fn nonsym_transpose_and_bounds() -> Result<(), String> {
    let grid = TorusGrid::new(2, 6).unwrap();
    let a = vec![1.4, 0.3, 0.3, 1.1];
    let spec = MediumSpec::new(MediumKind::IidUniform { lo: 0.5, hi: 2.0 }, 2.0).unwrap();
    let e = sample_matrix_field(&spec, Seed::new(11), grid, MatrixKind::Skew).unwrap();
    let minus_e = perihom_core::lattice::MatrixField::from_fn(grid, |i, j, x| {
        -e.get(i, j, grid.site_index(x))
    });
    let opts = SolveOptions::for_grid(grid).with_tol(1e-12);
    let (tp, _) = sigma_nonsym(&a, &e, opts).map_err(|er| er.to_string())?;
    let (tm, _) = sigma_nonsym(&a, &minus_e, opts).map_err(|er| er.to_string())?;
    let dev = linalg::max_abs_diff(&tm.sigma, &linalg::transpose(2, &tp.sigma));
    ensure(dev <= 1e-8, format!("σ(a,−E) vs ᵗσ(a,E) dev {dev:e}"))?;
    let lower: Vec<f64> = tp.sym().iter().zip(&a).map(|(s, aa)| s - aa).collect();
    let eig = linalg::sym_eigenvalues(2, &lower)[0];
    ensure(eig >= -1e-10, format!("a ≼ σ_sym violated by {eig:e}"))
}

fn norris_identity() -> Result<(), String> {
    let grid = TorusGrid::new(2, 5).unwrap();
    let a = vec![1.5, 0.25, 0.25, 0.9];
    let spec = MediumSpec::new(MediumKind::IidUniform { lo: 0.5, hi: 2.0 }, 2.0).unwrap();
    let e = sample_matrix_field(&spec, Seed::new(13), grid, MatrixKind::Skew).unwrap();
    let opts = SolveOptions::for_grid(grid).with_tol(1e-12);
    let (tensor, _) = sigma_nonsym(&a, &e, opts).map_err(|er| er.to_string())?;
    let l = [0.7, 1.1];
    let xi = [-0.3, 0.8];
    let mut sl = [0.0; 2];
    linalg::mat_vec(2, &tensor.sigma, &l, &mut sl);
    let diff = [xi[0] - sl[0], xi[1] - sl[1]];
    let sym_inv = linalg::inverse(2, &tensor.sym()).ok_or("singular σ_sym")?;
    let mut tmp = [0.0; 2];
    linalg::mat_vec(2, &sym_inv, &diff, &mut tmp);
    let expect = diff[0] * tmp[0] + diff[1] * tmp[1];
    let (value, _) = norris_value(&a, &e, &xi, &l, opts).map_err(|er| er.to_string())?;
    ensure(
        (value - expect).abs() <= 1e-6 * expect.max(1e-12),
        format!("polarization value {value} vs tensor form {expect}"),
    )
}

fn sampling_determinism() -> Result<(), String> {
    let grid = TorusGrid::new(2, 16).unwrap();
    let spec = MediumSpec::new(MediumKind::MovingAverage { radius: 2 }, 4.0).unwrap();
    let a = sample_conductances(&spec, Seed::realization(3, 4), grid).unwrap();
    let b = sample_conductances(&spec, Seed::realization(3, 4), grid).unwrap();
    ensure(a.vector().values() == b.vector().values(), "sampling not reproducible".into())
}

fn scaling() -> Result<(), String> {
    let grid = TorusGrid::new(2, 6).unwrap();
    let xi = sample_conductances(&two_phase(), Seed::new(19), grid).unwrap();
    let opts = SolveOptions::for_grid(grid);
    let (base, _) = sigma_primal_discrete(&xi, opts).map_err(|e| e.to_string())?;
    let doubled = VectorField::from_values(
        grid,
        xi.vector().values().iter().map(|v| 2.0 * v).collect(),
    )
    .unwrap();
    let xi2 = perihom_core::media::EdgeConductanceField::new(doubled, 1.0, 4.0).unwrap();
    let (t2, _) = sigma_primal_discrete(&xi2, opts).map_err(|e| e.to_string())?;
    let want: Vec<f64> = base.sigma.iter().map(|v| 2.0 * v).collect();
    let dev = linalg::max_abs_diff(&t2.sigma, &want);
    ensure(dev <= 1e-12, format!("σ(2ξ) vs 2σ(ξ) dev {dev:e}"))
}

/// Run every check, printing one line per check. Returns the failure count.
pub fn run(mut sink: impl std::io::Write) -> std::io::Result<usize> {
    let checks: Vec<Check> = vec![
        ("adjointness", adjointness),
        ("div_skew_orthogonality", div_skew_orthogonality),
        ("weyl_parseval_roundtrip", weyl_parseval_roundtrip),
        ("constant_media_exact", constant_media_exact),
        ("one_dimensional_harmonic", one_dimensional_harmonic),
        ("laminate_means", laminate_means),
        ("finite_n_duality", duality),
        ("nonsym_transpose_and_bounds", nonsym_transpose_and_bounds),
        ("norris_identity", norris_identity),
        ("sampling_determinism", sampling_determinism),
        ("scaling_equivariance", scaling),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => writeln!(sink, "PASS {name}")?,
            Err(msg) => {
                failures += 1;
                writeln!(sink, "FAIL {name}: {msg}")?;
            }
        }
    }
    Ok(failures)
}
