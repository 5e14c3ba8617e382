//! Generator contracts: determinism, window consistency, bounds, known-type
//! field constructions and the Birkhoff diagnostic.

use perihom_core::lattice::{grad, TorusGrid, VectorField};
use perihom_core::linalg;
use perihom_core::media::{
    birkhoff_quality, known_potential_primitive, sample_conductances, sample_known_potential,
    sample_known_solenoidal, sample_matrix_field, MatrixKind, MediaError, MediumKind, MediumSpec,
    Seed,
};

fn two_phase(p: f64) -> MediumSpec {
    MediumSpec::new(MediumKind::IidTwoPhase { t_low: 0.5, t_high: 2.0, p }, 2.0).unwrap()
}

fn correlated(radius: usize) -> MediumSpec {
    MediumSpec::new(MediumKind::MovingAverage { radius }, 4.0).unwrap()
}

#[test]
fn constant_medium_is_constant() {
    let spec = MediumSpec::new(MediumKind::Constant { values: vec![1.5, 0.75] }, 2.0).unwrap();
    let grid = TorusGrid::new(2, 4).unwrap();
    let xi = sample_conductances(&spec, Seed::new(1), grid).unwrap();
    assert!(xi.vector().component(0).iter().all(|&v| v == 1.5));
    assert!(xi.vector().component(1).iter().all(|&v| v == 0.75));
}

#[test]
fn two_phase_p_zero_is_all_low() {
    let grid = TorusGrid::new(2, 8).unwrap();
    let xi = sample_conductances(&two_phase(0.0), Seed::new(3), grid).unwrap();
    assert!(xi.vector().values().iter().all(|&v| v == 0.5));
}

#[test]
fn window_consistency_across_sizes() {
    // N=4 and N=8 windows with the same seed agree on the shared corner
    let spec = two_phase(0.5);
    let seed = Seed::new(42);
    let small = sample_conductances(&spec, seed, TorusGrid::new(2, 4).unwrap()).unwrap();
    let large = sample_conductances(&spec, seed, TorusGrid::new(2, 8).unwrap()).unwrap();
    for x0 in 0..4i64 {
        for x1 in 0..4i64 {
            for comp in 0..2 {
                let a = small.vector().get(comp, small.grid().site_index(&[x0, x1]));
                let b = large.vector().get(comp, large.grid().site_index(&[x0, x1]));
                assert_eq!(a, b, "comp {comp} at ({x0},{x1})");
            }
        }
    }
    // same for the correlated medium
    let spec = correlated(1);
    let small = sample_conductances(&spec, seed, TorusGrid::new(2, 8).unwrap()).unwrap();
    let large = sample_conductances(&spec, seed, TorusGrid::new(2, 16).unwrap()).unwrap();
    for x0 in 0..8i64 {
        for x1 in 0..8i64 {
            let a = small.vector().get(0, small.grid().site_index(&[x0, x1]));
            let b = large.vector().get(0, large.grid().site_index(&[x0, x1]));
            assert_eq!(a, b);
        }
    }
}

#[test]
fn determinism_bit_identical() {
    let spec = correlated(2);
    let grid = TorusGrid::new(3, 8).unwrap();
    let a = sample_conductances(&spec, Seed::realization(9, 4), grid).unwrap();
    let b = sample_conductances(&spec, Seed::realization(9, 4), grid).unwrap();
    assert_eq!(a.vector().values(), b.vector().values());
    // different realization differs
    let c = sample_conductances(&spec, Seed::realization(9, 5), grid).unwrap();
    assert_ne!(a.vector().values(), c.vector().values());
}

#[cfg(feature = "parallel")]
#[test]
fn determinism_across_thread_counts() {
    let spec = correlated(2);
    let grid = TorusGrid::new(2, 32).unwrap();
    let reference = sample_conductances(&spec, Seed::new(5), grid).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| sample_conductances(&spec, Seed::new(5), grid).unwrap());
    assert_eq!(reference.vector().values(), single.vector().values());
}

#[test]
fn bounds_hold_everywhere() {
    let grid = TorusGrid::new(2, 16).unwrap();
    for spec in [two_phase(0.3), correlated(2)] {
        let xi = sample_conductances(&spec, Seed::new(8), grid).unwrap();
        let (lo, hi) = xi.bounds();
        for &v in xi.vector().values() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}

#[test]
fn invalid_spec_rejected() {
    // two-phase value outside [1/c, c]
    assert!(matches!(
        MediumSpec::new(MediumKind::IidTwoPhase { t_low: 0.1, t_high: 2.0, p: 0.5 }, 2.0),
        Err(MediaError::ValueOutOfBounds { .. })
    ));
    assert!(matches!(
        MediumSpec::new(MediumKind::Constant { values: vec![1.0] }, 0.5),
        Err(MediaError::BadContrast(_))
    ));
    assert!(matches!(
        MediumSpec::new(MediumKind::IidTwoPhase { t_low: 0.5, t_high: 2.0, p: 1.5 }, 2.0),
        Err(MediaError::BadProbability(_))
    ));
}

#[test]
fn empirical_mean_within_four_standard_errors() {
    // iid_two_phase over N=64, d=2 window
    let spec = two_phase(0.5);
    let grid = TorusGrid::new(2, 64).unwrap();
    let xi = sample_conductances(&spec, Seed::new(7), grid).unwrap();
    let vals = xi.vector().values();
    let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
    let expect = 0.5 * 2.0 + 0.5 * 0.5;
    let var = 0.5 * (2.0f64 - expect).powi(2) + 0.5 * (0.5 - expect).powi(2);
    let se = (var / vals.len() as f64).sqrt();
    assert!((mean - expect).abs() <= 4.0 * se, "mean {mean} vs {expect} (se {se})");
}

#[test]
fn skew_kind_d1_is_zero() {
    let grid = TorusGrid::new(1, 8).unwrap();
    let e = sample_matrix_field(&two_phase(0.5), Seed::new(2), grid, MatrixKind::Skew).unwrap();
    assert!(e.values().iter().all(|&v| v == 0.0));
}

#[test]
fn symmetric_constant_spec_gives_constant_matrix() {
    let spec = MediumSpec::new(MediumKind::Constant { values: vec![1.25, 0.8] }, 2.0).unwrap();
    let grid = TorusGrid::new(2, 4).unwrap();
    let a = sample_matrix_field(&spec, Seed::new(2), grid, MatrixKind::Symmetric).unwrap();
    for site in 0..grid.sites() {
        assert_eq!(a.get(0, 0, site), 1.25);
        assert_eq!(a.get(1, 1, site), 0.8);
        assert_eq!(a.get(0, 1, site), 0.0);
    }
}

#[test]
fn matrix_eigenvalue_bounds_hold() {
    // ν₁ = 1/c, ν₂ = c at every cell for 10³ sampled cells
    let spec = correlated(1);
    let grid = TorusGrid::new(3, 10).unwrap();
    let a = sample_matrix_field(&spec, Seed::new(13), grid, MatrixKind::Symmetric).unwrap();
    let mut cell = vec![0.0; 9];
    for site in 0..grid.sites() {
        a.at_site(site, &mut cell);
        let eigs = linalg::sym_eigenvalues(3, &cell);
        assert!(eigs[0] >= spec.lo() - 1e-12 && eigs[2] <= spec.hi() + 1e-12);
    }

    // skew samples are exactly skew and bounded
    let e = sample_matrix_field(&spec, Seed::new(13), grid, MatrixKind::Skew).unwrap();
    assert_eq!(e.max_skew_violation(), 0.0);
    let bound = (spec.hi() - spec.lo()) / 2.0;
    for &v in e.values() {
        assert!(v.abs() <= bound + 1e-12);
    }
}

#[test]
fn known_potential_interior_matches_windowed_gradient() {
    let spec = correlated(2);
    let seed = Seed::new(21);
    let grid = TorusGrid::new(2, 16).unwrap();
    let infinite = sample_known_potential(&spec, seed, grid).unwrap();
    let windowed = grad(&known_potential_primitive(&spec, seed, grid).unwrap());
    let n = grid.n() as i64;
    let mut boundary_differs = false;
    for x0 in 0..n {
        for x1 in 0..n {
            let site = grid.site_index(&[x0, x1]);
            for comp in 0..2 {
                let a = infinite.get(comp, site);
                let b = windowed.get(comp, site);
                let wraps = (comp == 0 && x0 == n - 1) || (comp == 1 && x1 == n - 1);
                if !wraps {
                    assert_eq!(a, b, "interior mismatch at ({x0},{x1}) comp {comp}");
                } else if (a - b).abs() > 1e-12 {
                    boundary_differs = true;
                }
            }
        }
    }
    assert!(boundary_differs, "periodization must differ somewhere on the boundary");
}

#[test]
fn known_potential_mean_shrinks_with_n() {
    // Birkhoff: |window mean| at N=64 below the value at N=16 for fixed seed
    let spec = correlated(2);
    let seed = Seed::new(33);
    let mean_norm = |n: usize| -> f64 {
        let grid = TorusGrid::new(2, n).unwrap();
        let v = sample_known_potential(&spec, seed, grid).unwrap();
        v.component_means().iter().map(|m| m * m).sum::<f64>().sqrt()
    };
    assert!(mean_norm(64) < mean_norm(16));
}

#[test]
fn known_potential_constant_medium_rejected() {
    let spec = MediumSpec::new(MediumKind::Constant { values: vec![1.0] }, 1.0).unwrap();
    let grid = TorusGrid::new(2, 16).unwrap();
    assert!(matches!(
        sample_known_potential(&spec, Seed::new(1), grid),
        Err(MediaError::KindMismatch(_))
    ));
    // radius too large for the window
    let wide = correlated(5);
    let small = TorusGrid::new(2, 16).unwrap();
    assert!(matches!(
        sample_known_potential(&wide, Seed::new(1), small),
        Err(MediaError::RadiusTooLarge { .. })
    ));
}

#[test]
fn known_solenoidal_has_small_potential_part() {
    let spec = correlated(2);
    let grid = TorusGrid::new(2, 32).unwrap();
    let v = sample_known_solenoidal(&spec, Seed::new(5), grid).unwrap();
    let split = perihom_core::weyl::decompose(&v);
    // the potential residue is the boundary-layer defect, well below the norm
    assert!(split.potential.norm() < 0.5 * v.norm());
    assert!(split.solenoidal.norm() > 0.5 * v.norm());
}

#[test]
fn birkhoff_zero_field_reaches_maximum() {
    // all conditions hold trivially: the maximum admissible M is the largest
    // with a resolvable M²-partition, here √16 = 4
    let grid = TorusGrid::new(2, 16).unwrap();
    let v = VectorField::zeros(grid);
    assert_eq!(birkhoff_quality(&v, 1.0), 4);
    let grid = TorusGrid::new(2, 64).unwrap();
    assert_eq!(birkhoff_quality(&VectorField::zeros(grid), 1.0), 8);
}

#[test]
fn birkhoff_constant_field_bounded_by_inverse_magnitude() {
    // |v| = 0.3: the mean condition M·|v| ≤ 1 caps M at 3, below the
    // resolution bound √32 ≈ 5
    let grid = TorusGrid::new(2, 32).unwrap();
    let v = VectorField::from_fn(grid, |comp, _| if comp == 0 { 0.3 } else { 0.0 });
    assert_eq!(birkhoff_quality(&v, 1.0), 3);
    // |v| = 0.6 kills every M ≥ 2
    let v = VectorField::from_fn(grid, |comp, _| if comp == 0 { 0.6 } else { 0.0 });
    assert_eq!(birkhoff_quality(&v, 1.0), 1);
}

#[test]
fn birkhoff_quality_grows_with_n() {
    // median over 8 seeds is monotone over N ∈ {16, 32, 64}
    let spec = correlated(2);
    let median_m = |n: usize| -> f64 {
        let grid = TorusGrid::new(2, n).unwrap();
        let mut ms: Vec<usize> = (0..8)
            .map(|r| {
                let v = sample_known_potential(&spec, Seed::realization(77, r), grid).unwrap();
                let second_moment = v.norm().powi(2);
                birkhoff_quality(&v, second_moment)
            })
            .collect();
        ms.sort_unstable();
        (ms[3] + ms[4]) as f64 / 2.0
    };
    let (m16, m32, m64) = (median_m(16), median_m(32), median_m(64));
    assert!(
        m16 <= m32 && m32 <= m64 && m16 < m64,
        "medians not monotone: {m16} {m32} {m64}"
    );
}

#[test]
fn laminate_values_follow_profile() {
    let spec = MediumSpec::new(
        MediumKind::Laminate { axis: 0, profile: vec![vec![0.5, 1.0], vec![2.0, 1.0]] },
        2.0,
    )
    .unwrap();
    let grid = TorusGrid::new(2, 4).unwrap();
    let xi = sample_conductances(&spec, Seed::new(1), grid).unwrap();
    for x0 in 0..4i64 {
        for x1 in 0..4i64 {
            let site = grid.site_index(&[x0, x1]);
            let want0 = if x0 % 2 == 0 { 0.5 } else { 2.0 };
            assert_eq!(xi.vector().get(0, site), want0);
            assert_eq!(xi.vector().get(1, site), 1.0);
        }
    }
}

#[test]
fn deterministic_periodic_table_lookup() {
    let spec = MediumSpec::new(
        MediumKind::DeterministicPeriodic {
            period: vec![2, 2],
            table: vec![
                // lexicographic layers (0,0),(0,1),(1,0),(1,1), two channels each
                1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7,
            ],
        },
        2.0,
    )
    .unwrap();
    let grid = TorusGrid::new(2, 4).unwrap();
    let xi = sample_conductances(&spec, Seed::new(1), grid).unwrap();
    assert_eq!(xi.vector().get(0, grid.site_index(&[0, 0])), 1.0);
    assert_eq!(xi.vector().get(1, grid.site_index(&[0, 1])), 1.3);
    assert_eq!(xi.vector().get(0, grid.site_index(&[1, 0])), 1.4);
    assert_eq!(xi.vector().get(1, grid.site_index(&[3, 3])), 1.7);
}
