use super::*;
use crate::gauss::normal_pdf;
use crate::hermite::normalized_hermite_multi;
use approx::assert_abs_diff_eq;
use rand::Rng;

fn rho(v: f64) -> CorrelationParam {
    CorrelationParam::new(v).unwrap()
}

// (mass, first, second) of {z : ⟨z − q, n⟩ ≥ 0}
fn half_plane_moments(q: [f64; 2], n: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let d = q[0] * n[0] + q[1] * n[1];
    let mass = normal_sf(d);
    let along = normal_pdf(d);
    let tt = d * normal_pdf(d) + normal_sf(d);
    let ww = mass;
    let w = [-n[1], n[0]];
    let mut second = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            second[a][b] = tt * n[a] * n[b] + ww * w[a] * w[b];
        }
    }
    (mass, [along * n[0], along * n[1]], second)
}

#[test]
fn wedge_moments_of_half_planes() {
    for (q, start) in [
        ([0.3, -0.7], 0.4),
        ([4.0, 5.0], -2.0),
        ([-6.0, 1.0], 1.0),
        ([0.0, 0.0], 0.0),
    ] {
        let m = wedge_moments(q, Sector::new(start, PI));
        let n = [-f64::sin(start), start.cos()];
        let (mass, first, second) = half_plane_moments(q, n);
        assert_abs_diff_eq!(m.mass, mass, epsilon = 1e-13);
        for a in 0..2 {
            assert_abs_diff_eq!(m.first[a], first[a], epsilon = 1e-13);
            for b in 0..2 {
                assert_abs_diff_eq!(m.second[a][b], second[a][b], epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn wedge_at_origin_is_a_sector() {
    let arc = Sector::new(0.3, 1.7);
    let m = wedge_moments([0.0, 0.0], arc);
    assert_abs_diff_eq!(m.mass, arc.measure(), epsilon = 1e-14);
    let b = arc.barycenter();
    assert_abs_diff_eq!(m.first[0], b[0], epsilon = 1e-14);
    assert_abs_diff_eq!(m.first[1], b[1], epsilon = 1e-14);
    assert_abs_diff_eq!(m.second[0][0] + m.second[1][1], 2.0 * arc.measure(), epsilon = 1e-13);
}

#[test]
fn radial_branches_agree_at_the_switch() {
    for b in [LARGE_B - 1e-9, LARGE_B + 1e-9] {
        let closed = {
            let g = (-0.5 * b * b).exp();
            let e = TAU.sqrt() * normal_sf(b);
            [
                g - b * e,
                (1.0 + b * b) * e - b * g,
                (b * b + 2.0) * g - (3.0 * b + b * b * b) * e,
            ]
        };
        let v = radial_moments(b, 0.0);
        for m in 0..3 {
            assert!(
                (v[m] - closed[m]).abs() < 1e-9 * closed[m],
                "m = {m}: {} vs {}",
                v[m],
                closed[m]
            );
        }
    }
}

#[test]
fn wedge_split_matches_additivity() {
    let q = [1.2, -0.4];
    let whole = wedge_moments(q, Sector::new(-1.0, 4.0));
    let left = wedge_moments(q, Sector::new(-1.0, 1.5));
    let right = wedge_moments(q, Sector::new(0.5, 2.5));
    assert_abs_diff_eq!(whole.mass, left.mass + right.mass, epsilon = 1e-14);
    assert_abs_diff_eq!(
        whole.second[0][1],
        left.second[0][1] + right.second[0][1],
        epsilon = 1e-13
    );
}

#[test]
fn indicator_operator_matches_monte_carlo() {
    let p = ConicalPartition::regular(3, 2).unwrap();
    let x = [0.8, -1.3];
    let r = 0.6;
    let exact = t_rho_indicator(&p, 1, rho(r), &x).unwrap();
    let s = (1.0 - r * r).sqrt();
    let est = monte_carlo(RandomSource::new(7), 400_000, 1, |rng, out| {
        let y = standard_normal_vec(2, rng);
        let z = [r * x[0] + s * y[0], r * x[1] + s * y[1]];
        out[0] = (p.classify_unchecked(&z) == 1) as u8 as f64;
    });
    assert!((exact - est.mean[0]).abs() < 5.0 * est.std_error[0]);
}

#[test]
fn indicator_operator_at_the_endpoints() {
    let p = ConicalPartition::regular(3, 2).unwrap();
    let x = [0.5, 0.1];
    assert_eq!(t_rho_indicator(&p, 0, rho(1.0), &x).unwrap(), 1.0);
    assert_eq!(t_rho_indicator(&p, 2, rho(-1.0), &x).unwrap(), 1.0);
    assert_eq!(t_rho_indicator(&p, 1, rho(-1.0), &x).unwrap(), 0.0);
    let total: f64 = (0..3).map(|i| t_rho_indicator(&p, i, rho(0.4), &x).unwrap()).sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-13);
    assert_abs_diff_eq!(
        t_rho_indicator(&p, 1, rho(0.0), &x).unwrap(),
        1.0 / 3.0,
        epsilon = 1e-14
    );
}

#[test]
fn semigroup_composition() {
    let p = ConicalPartition::regular(3, 2).unwrap();
    let grid = QuadratureGrid::tensor_gauss_hermite(2, 48);
    let (r1, r2) = (0.7, 0.6);
    for x in [[0.3, 0.4], [-1.0, 0.9], [2.0, -0.5]] {
        let inner = |y: &[f64]| t_rho_indicator(&p, 0, rho(r2), y).unwrap();
        let composed = t_rho_apply(inner, rho(r1), &x, &grid).unwrap();
        let direct = t_rho_indicator(&p, 0, rho(r1 * r2), &x).unwrap();
        assert_abs_diff_eq!(composed, direct, epsilon = 1e-5);
    }
}

#[test]
fn hermite_polynomials_are_eigenfunctions() {
    let grid = QuadratureGrid::tensor_gauss_hermite(2, 30);
    for ell in MultiIndex::all_up_to(2, 6) {
        for r in [-0.8, 0.35] {
            let x = [0.7, -1.1];
            let f = |y: &[f64]| normalized_hermite_multi(&ell, y).unwrap();
            let lhs = t_rho_apply(f, rho(r), &x, &grid).unwrap();
            let rhs = r.powi(ell.degree() as i32) * f(&x);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }
}

#[test]
fn generator_on_hermite_polynomials() {
    let ell = MultiIndex::new(vec![2, 1]);
    let f = |y: &[f64]| normalized_hermite_multi(&ell, y).unwrap();
    let x = [0.4, -0.9];
    let l = l_apply(f, &x).unwrap();
    assert_abs_diff_eq!(l, 3.0 * f(&x), epsilon = 1e-6);
}

#[test]
fn derivative_routes_agree_on_smooth_functions() {
    let grid = QuadratureGrid::tensor_gauss_hermite(2, 40);
    let f = |y: &[f64]| (0.8 * y[0]).sin() + y[0] * y[0] * y[1] + (0.3 * y[1]).exp();
    let x = [0.6, -0.4];
    for r in [-0.6, 0.25, 0.7] {
        let integral = dt_drho(f, rho(r), &x, &grid).unwrap();
        let via_l = dt_drho_via_l(f, rho(r), &x, &grid).unwrap();
        let h = RHO_STEP;
        let fd = (t_rho_apply(f, rho(r + h), &x, &grid).unwrap() - t_rho_apply(f, rho(r - h), &x, &grid).unwrap())
            / (2.0 * h);
        assert_abs_diff_eq!(integral, fd, epsilon = 1e-6);
        assert_abs_diff_eq!(via_l, fd, epsilon = 1e-5);
    }
    assert!(dt_drho(f, rho(0.0), &x, &grid).is_ok());
    assert!(dt_drho_via_l(f, rho(0.0), &x, &grid).is_err());
}

#[test]
fn indicator_derivative_routes_agree() {
    let p = ConicalPartition::regular(3, 2).unwrap();
    for x in [[0.5, 0.2], [-1.5, 2.0], [3.0, -0.1]] {
        for r in [-0.7f64, -0.1, 0.3, 0.8] {
            for i in 0..3 {
                let view = p.planar_view().unwrap();
                let s = (1.0 - r * r).sqrt();
                let closed = planar_dt_drho(view.arcs[i], r, s, x);
                let integral = indicator_dt_drho(&p, i, rho(r), &x).unwrap();
                let h = RHO_STEP;
                let fd = (t_rho_indicator(&p, i, rho(r + h), &x).unwrap()
                    - t_rho_indicator(&p, i, rho(r - h), &x).unwrap())
                    / (2.0 * h);
                assert_abs_diff_eq!(closed, integral, epsilon = 1e-11);
                assert_abs_diff_eq!(closed, fd, epsilon = 1e-6);
            }
        }
    }
}

#[test]
fn scaled_gradient_matches_differences_in_space() {
    let p = ConicalPartition::regular(3, 3).unwrap();
    let x = [0.4, -0.7, 1.1];
    let r = 0.55;
    let g = indicator_scaled_gradient(&p, 2, rho(r), &x).unwrap();
    let h = 1e-5;
    for k in 0..3 {
        let mut up = x;
        let mut down = x;
        up[k] += h;
        down[k] -= h;
        let fd =
            (t_rho_indicator(&p, 2, rho(r), &up).unwrap() - t_rho_indicator(&p, 2, rho(r), &down).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(g[k], fd / r, epsilon = 1e-7);
    }
}

#[test]
fn boundary_identity_on_the_shared_ray() {
    // cells symmetric about the vertical axis, sharing the ray at 90°
    let p = ConicalPartition::sectors(vec![-PI / 6.0, PI / 2.0, 7.0 * PI / 6.0]).unwrap();
    for t in [0.5, 1.0, 3.0] {
        let x = [0.0, t];
        for r in [-0.4, 0.6] {
            let d = lt_rho_difference(&p, 0, 1, rho(r), &x).unwrap();
            assert_abs_diff_eq!(d.boundary.unwrap(), d.direct, epsilon = 1e-10);
            assert_abs_diff_eq!(d.volume_term, 0.0, epsilon = 1e-12);
        }
    }
    let d = lt_rho_difference(&p, 0, 1, rho(-0.05), &[86.6, 60.0]).unwrap();
    assert!((d.boundary.unwrap() - d.direct).abs() < 1e-3);
}

#[test]
fn boundary_identity_in_three_dimensions() {
    let p = ConicalPartition::regular(3, 3).unwrap();
    let x = [0.3, 0.9, -2.0];
    let on_grid =
        lt_rho_difference_on_grid(&p, 0, 1, rho(0.5), &x, &QuadratureGrid::gaussian_box(3, 100, 7.0)).unwrap();
    let exact = lt_rho_difference(&p, 0, 1, rho(0.5), &x).unwrap();
    // the box rule converges only at first order across the cell walls
    assert!(
        (on_grid.direct - exact.direct).abs() < 1.5e-2,
        "{} vs {}",
        on_grid.direct,
        exact.direct
    );
}

#[test]
fn stability_of_half_planes() {
    let p = ConicalPartition::sectors(vec![0.0, PI]).unwrap();
    for r in [-0.9, -0.3, 0.0, 0.5, 0.95] {
        let expected = 0.5 + f64::asin(r) / PI;
        let q = noise_stability_j(&p, rho(r), Method::Quadrature2d { nodes: 64 }).unwrap();
        assert_abs_diff_eq!(q.value, expected, epsilon = 1e-12);
        if r.abs() < 0.9 {
            let h = noise_stability_j(&p, rho(r), Method::HermiteSeries { degree: 24 }).unwrap();
            assert_abs_diff_eq!(h.value, expected, epsilon = 1e-6);
        }
    }
    let mc = noise_stability_j(
        &p,
        rho(0.5),
        Method::MonteCarlo {
            samples: 200_000,
            seed: 3,
        },
    )
    .unwrap();
    assert!((mc.value - 2.0 / 3.0).abs() < 5.0 * mc.error_estimate);
    assert_eq!(mc.seed, Some(3));
}

#[test]
fn stability_endpoints_and_independence() {
    let p = ConicalPartition::from_widths(0.2, &[1.0, 2.0, TAU - 3.0]).unwrap();
    let quad = Method::Quadrature2d { nodes: 64 };
    assert_abs_diff_eq!(
        noise_stability_j(&p, rho(1.0), quad).unwrap().value,
        1.0,
        epsilon = 1e-15
    );
    let independent: f64 = [1.0, 2.0, TAU - 3.0].iter().map(|w| (w / TAU).powi(2)).sum();
    assert_abs_diff_eq!(
        noise_stability_j(&p, rho(0.0), quad).unwrap().value,
        independent,
        epsilon = 1e-13
    );
    let antipodal: f64 = p
        .planar_view()
        .unwrap()
        .arcs
        .iter()
        .map(|a| arc_overlap(*a, a.rotated(PI)))
        .sum::<f64>()
        / TAU;
    assert_abs_diff_eq!(
        noise_stability_j(&p, rho(-1.0), quad).unwrap().value,
        antipodal,
        epsilon = 1e-15
    );
    let near = noise_stability_j(&p, rho(-1.0 + 1e-9), quad).unwrap().value;
    assert_abs_diff_eq!(near, antipodal, epsilon = 1e-3);
}

#[test]
fn stability_methods_agree_on_the_regular_partition() {
    let p = ConicalPartition::regular(3, 2).unwrap();
    let q = noise_stability_j(&p, rho(-0.5), Method::Quadrature2d { nodes: 64 }).unwrap();
    let h = noise_stability_j(&p, rho(-0.5), Method::HermiteSeries { degree: 24 }).unwrap();
    let mc = noise_stability_j(
        &p,
        rho(-0.5),
        Method::MonteCarlo {
            samples: 400_000,
            seed: 11,
        },
    )
    .unwrap();
    assert_abs_diff_eq!(q.value, 0.16399, epsilon = 1e-5);
    assert_abs_diff_eq!(q.value, h.value, epsilon = 1e-6);
    assert!((q.value - mc.value).abs() < 5.0 * mc.error_estimate);
    let p3 = ConicalPartition::regular(3, 3).unwrap();
    let q3 = noise_stability_j(&p3, rho(0.3), Method::Quadrature2d { nodes: 64 }).unwrap();
    let q2 = noise_stability_j(&p, rho(0.3), Method::Quadrature2d { nodes: 64 }).unwrap();
    assert_abs_diff_eq!(q3.value, q2.value, epsilon = 1e-14);
}

#[test]
fn monte_carlo_is_reproducible() {
    let p = ConicalPartition::regular(4, 3).unwrap();
    let m = Method::MonteCarlo {
        samples: 70_000,
        seed: 5,
    };
    let a = noise_stability_j(&p, rho(0.2), m).unwrap();
    let b = noise_stability_j(&p, rho(0.2), m).unwrap();
    assert_eq!(a.value, b.value);
}

#[test]
fn sector_coefficients_low_degrees() {
    let arc = Sector::new(0.4, 2.1);
    let c = sector_hermite_coefficients(arc, 24);
    assert_abs_diff_eq!(c.get(&MultiIndex::zeros(2)), arc.measure(), epsilon = 1e-14);
    let b = arc.barycenter();
    assert_abs_diff_eq!(c.get(&MultiIndex::new(vec![1, 0])), b[0], epsilon = 1e-14);
    assert_abs_diff_eq!(c.get(&MultiIndex::new(vec![0, 1])), b[1], epsilon = 1e-14);
    // (x² − 1)/√2 integrates over a sector to ∫ cos 2φ dφ / (2π √2)
    let expected = ((2.0 * arc.end()).sin() - (2.0 * arc.start).sin()) / (2.0 * TAU * 2f64.sqrt());
    assert_abs_diff_eq!(c.get(&MultiIndex::new(vec![2, 0])), expected, epsilon = 1e-14);
}

#[test]
fn sector_coefficients_match_direct_quadrature() {
    let arc = Sector::new(-0.7, 2.5);
    let c = sector_hermite_coefficients(arc, 12);
    let (rs, wr) = gauss_legendre_on(120, 0.0, 14.0);
    let (ts, wt) = gauss_legendre_on(120, arc.start, arc.end());
    for ell in [
        MultiIndex::new(vec![5, 3]),
        MultiIndex::new(vec![0, 12]),
        MultiIndex::new(vec![7, 4]),
    ] {
        let mut direct = 0.0;
        for (t, w2) in ts.iter().zip(&wt) {
            for (r, w1) in rs.iter().zip(&wr) {
                let x = [r * t.cos(), r * t.sin()];
                direct += w1 * w2 * r * (-0.5 * r * r).exp() / TAU * normalized_hermite_multi(&ell, &x).unwrap();
            }
        }
        assert_abs_diff_eq!(c.get(&ell), direct, epsilon = 1e-12);
    }
}

#[test]
fn cell_coefficients_in_three_dimensions() {
    let p = ConicalPartition::regular(3, 3).unwrap();
    let exact = hermite_coefficients_of_cell(&p, 1, 3, None).unwrap();
    assert_eq!(exact.get(&MultiIndex::new(vec![0, 0, 2])), 0.0);
    let tilted =
        ConicalPartition::induced(vec![vec![1.0, 0.0, 1.0], vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, -1.0]]).unwrap();
    assert!(hermite_coefficients_of_cell(&tilted, 0, 2, None).is_err());
    let mc = hermite_coefficients_of_cell(&p, 1, 2, Some((RandomSource::new(1), 300_000))).unwrap();
    for (ell, v) in mc.iter() {
        assert!((v - exact.get(ell)).abs() < 6e-3, "{ell:?}: {v} vs {}", exact.get(ell));
    }
}

#[test]
fn psi_matches_derivative_of_stability() {
    let p = ConicalPartition::regular(3, 2).unwrap();
    for r in [-0.5, 0.0, 0.4] {
        let series = psi_rho(&p, r, SeriesOptions { degree: 48, tol: 1e-10 }).unwrap();
        let fd = dj_drho_finite_difference(&p, r).unwrap();
        assert_abs_diff_eq!(series.value, fd, epsilon = 1e-6);
        let direct = psi_rho_direct(&p, rho(r), 80, 40).unwrap();
        assert_abs_diff_eq!(series.value, direct, epsilon = 1e-8);
    }
    let psi0 = psi_rho(&p, 0.0, SeriesOptions::default()).unwrap().value;
    assert_abs_diff_eq!(psi0, p.psi_zero().unwrap(), epsilon = 1e-14);
}

#[test]
fn psi_rejects_short_truncation() {
    let p = ConicalPartition::regular(3, 2).unwrap();
    let err = psi_rho(&p, 0.9, SeriesOptions { degree: 10, tol: 1e-8 }).unwrap_err();
    assert!(matches!(err, Error::TruncationTooSmall { degree: 10, .. }));
    assert!(psi_rho(&p, 1.0, SeriesOptions::default()).is_err());
}

#[test]
fn psi_from_coefficients_agrees() {
    let p = ConicalPartition::from_widths(0.0, &[1.5, 2.5, TAU - 4.0]).unwrap();
    let cells: Vec<HermiteSeries> = (0..3)
        .map(|i| hermite_coefficients_of_cell(&p, i, 24, None).unwrap())
        .collect();
    let a = psi_rho_from_coefficients(&cells, -0.3);
    let b = psi_rho(&p, -0.3, SeriesOptions::default()).unwrap().value;
    let c = psi_rho_of_widths(&[1.5, 2.5, TAU - 4.0], -0.3, 24);
    assert_abs_diff_eq!(a, b, epsilon = 1e-14);
    assert_abs_diff_eq!(b, c, epsilon = 1e-14);
    assert_abs_diff_eq!(
        stability_from_coefficients(&cells, -0.3),
        noise_stability_j(&p, rho(-0.3), Method::Quadrature2d { nodes: 64 })
            .unwrap()
            .value,
        epsilon = 1e-9
    );
}

#[test]
fn cone_moment_vanishes_for_cones() {
    let flat = ConicalPartition::regular(3, 2).unwrap();
    let on_grid = cone_moment(&flat, 0, &QuadratureGrid::gaussian_box(2, 400, 7.0)).unwrap();
    assert_abs_diff_eq!(on_grid, 0.0, epsilon = 5e-3);
    let p = ConicalPartition::regular(3, 3).unwrap();
    let (mc, se) = cone_moment_monte_carlo(&p, 0, RandomSource::new(2), 200_000);
    assert!(mc.abs() < 5.0 * se);
}

#[test]
fn cone_moment_of_random_sectors() {
    let mut rng = RandomSource::new(5).rng();
    for _ in 0..20 {
        let a: f64 = rng.random_range(0.05..3.0);
        let b: f64 = rng.random_range(0.05..(TAU - a - 0.05));
        let p = ConicalPartition::from_widths(rng.random_range(0.0..TAU), &[a, b, TAU - a - b]).unwrap();
        for i in 0..3 {
            assert!(cone_moment_planar(&p, i, 64).unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn psi_is_nonnegative_and_increasing() {
    let p = ConicalPartition::from_widths(0.4, &[1.3, 2.0, TAU - 3.3]).unwrap();
    let options = SeriesOptions { degree: 48, tol: 1e-10 };
    let values: Vec<f64> = (0..=10)
        .map(|i| psi_rho(&p, 0.05 * i as f64, options).unwrap().value)
        .collect();
    assert!(values[0] > 0.0);
    for w in values.windows(2) {
        assert!(w[1] >= w[0]);
    }
    let fd = dj_drho_finite_difference(&p, 0.1).unwrap();
    assert_abs_diff_eq!(values[2], fd, epsilon = 1e-6);
}
