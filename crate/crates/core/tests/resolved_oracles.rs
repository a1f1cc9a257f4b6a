use conifold_core::cutoff::{ChiSpec, SmoothStep};
use conifold_core::frame::{form_square_root, CMatrix3};
use conifold_core::numerics::fd;
use conifold_core::resolved::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn point_from_reals(x: &[f64]) -> ResolvedPoint {
    ResolvedPoint { z: c(x[0], x[1]), u: c(x[2], x[3]), v: c(x[4], x[5]) }
}

fn reals(p: &ResolvedPoint) -> [f64; 6] {
    [p.z.re, p.z.im, p.u.re, p.u.im, p.v.re, p.v.im]
}

/// `(∂_z h, ∂_u h, ∂_v h)` by central differences in the six real coordinates.
fn fd_gradient(h: &dyn Fn(&ResolvedPoint) -> f64, p: &ResolvedPoint, step: f64) -> [Complex64; 3] {
    let f = |x: &[f64]| [h(&point_from_reals(x))];
    let x = reals(p);
    std::array::from_fn(|k| {
        let dx = fd::gradient_entry(&f, &x, 2 * k, step)[0];
        let dy = fd::gradient_entry(&f, &x, 2 * k + 1, step)[0];
        c(0.5 * dx, -0.5 * dy)
    })
}

/// `∂_i ∂_{j̄} h` by central differences.
fn fd_levi(h: &dyn Fn(&ResolvedPoint) -> f64, p: &ResolvedPoint, step: f64) -> CMatrix3 {
    let f = |x: &[f64]| [h(&point_from_reals(x))];
    let x = reals(p);
    let d = |a: usize, b: usize| fd::hessian_entry(&f, &x, a, b, step)[0];
    CMatrix3::from_fn(|i, j| {
        let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        c(0.25 * (d(xi, xj) + d(yi, yj)), 0.25 * (d(xi, yj) - d(yi, xj)))
    })
}

fn max_abs(m: &CMatrix3) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn h1_derivatives_from_coefficients_match_finite_differences() {
    for seed in [0, 5, 9] {
        let s = ScenarioH::random(seed);
        let p = ResolvedPoint::new(c(0.8, -0.5), c(0.012, -0.007), c(0.004, 0.009)).unwrap();
        let h = |q: &ResolvedPoint| s.h1(q);
        let block = coefficients_cd(&s, &p);
        let r = p.r();

        let fd_grad = p.to_frame_10(&fd_gradient(&h, &p, 1e-3));
        let printed = [block.d[0] * r, block.d[1], block.d[2]];
        for k in 0..3 {
            assert!((fd_grad[k] - printed[k]).norm() < 1e-9, "∂h₁ component {k}: {} vs {}", fd_grad[k], printed[k]);
        }

        let fd_ddbar = p.to_frame_11(&fd_levi(&h, &p, 1e-3));
        let mut printed = block.c;
        printed[(0, 0)] *= r;
        assert!(max_abs(&(fd_ddbar - printed)) < 1e-8, "{fd_ddbar}\n{printed}");
    }
}

#[test]
fn r2_frame_expansions_match_finite_differences() {
    let p = ResolvedPoint::new(c(-1.2, 0.9), c(0.03, 0.01), c(-0.02, 0.025)).unwrap();
    let h = |q: &ResolvedPoint| q.r2();
    let g = p.to_frame_10(&fd_gradient(&h, &p, 1e-3));
    let printed = r2_gradient_frame(&p);
    for k in 0..3 {
        assert!((g[k] - printed[k]).norm() < 1e-10);
    }
    let l = p.to_frame_11(&fd_levi(&h, &p, 1e-3));
    assert!(max_abs(&(l - r2_levi_frame(&p))) < 1e-8);
}

#[test]
fn h2_polynomial_derivatives_match_finite_differences() {
    let s = ScenarioH::random(4);
    let p = ResolvedPoint::new(c(0.3, 0.4), c(0.05, -0.02), c(0.01, 0.03)).unwrap();
    let h = |q: &ResolvedPoint| s.h2_value(q);
    let g = fd_gradient(&h, &p, 1e-3);
    let exact = s.h2.gradient(&p);
    for k in 0..3 {
        assert!((g[k] - exact[k]).norm() < 1e-10);
    }
    assert!(max_abs(&(fd_levi(&h, &p, 1e-3) - s.h2.levi(&p))) < 1e-8);
}

#[test]
fn cone_square_is_homogeneous_in_the_fiber() {
    let n = 75.0;
    let p = ResolvedPoint::from_polar(c(1.1, 0.6), 0.013, 0.7, 0.4, -1.0).unwrap();
    let powers = [[-4.0 / 3.0, -1.0 / 3.0], [-1.0 / 3.0, 2.0 / 3.0]];
    let base = phi_form_with(n, 1.0, 0.0, &p).unwrap().to_lambda22().unwrap();
    for scale in [0.5, 1.7, 3.0] {
        let q = p.scaled(scale).unwrap();
        let e = phi_form_with(n, 1.0, 0.0, &q).unwrap().to_lambda22().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = base.e[(i, j)] * scale.powf(powers[i][j]);
                assert!((e.e[(i, j)] - want).norm() < 1e-12 * want.norm());
            }
        }
        let want = base.e[(2, 2)] * scale.powf(2.0 / 3.0);
        assert!((e.e[(2, 2)] - want).norm() < 1e-12 * want.norm());
    }
}

#[test]
fn glued_form_with_identity_cutoff_has_the_cone_metric_as_square_root() {
    for (z, r) in [(c(0.0, 0.0), 0.01), (c(0.9, -0.3), 0.2), (c(-1.5, 1.0), 0.05), (c(0.2, 0.1), 0.9)] {
        let p = ResolvedPoint::from_polar(z, r, 1.1, 0.2, 2.9).unwrap();
        let phi = phi_form_with(40.0, 1.0, 0.0, &p).unwrap();
        let root = form_square_root(&phi).unwrap();
        let want = base_forms(&p).unwrap().omega_co0;
        assert!(root.max_abs_diff(&want) < 1e-9 * want.max_abs(), "z = {z}, r = {r}");
    }
}

#[test]
fn glued_form_equals_cone_square_inside_the_gluing_radius() {
    let n = 200;
    let chi = ChiSpec::new(n).unwrap();
    for frac in [0.2, 1.0, 1.7, 1.99] {
        let p = ResolvedPoint::from_polar(c(0.4, -1.3), frac / n as f64, 0.5, 1.0, 2.0).unwrap();
        let w = base_forms(&p).unwrap().omega_co0;
        let square = w.wedge(&w).unwrap();
        let phi = phi_form(&chi, &p).unwrap();
        assert!(phi.max_abs_diff(&square) < 1e-12 * square.max_abs(), "n𝐫 = {frac}");
    }
}

#[test]
fn c2_is_stable_under_refinement_and_across_n() {
    let mut values = Vec::new();
    for n in [50, 100, 500, 1000] {
        let chi = ChiSpec::new(n).unwrap();
        let coarse = measure_c2(&chi, 4001).unwrap();
        let fine = measure_c2(&chi, 8001).unwrap();
        assert!(coarse.c2_hat > 0.0);
        assert!((fine.c2_hat - coarse.c2_hat).abs() < 0.05 * coarse.c2_hat);
        values.push(coarse.c2_hat);
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo < 1.5, "{values:?}");
}

#[test]
fn c3_is_stable_under_refinement() {
    let s = ScenarioH::default();
    let sigma = SmoothStep::sigma();
    let grid = AnnulusGrid { z_radii: vec![0.0, 1.0, 2.0], z_angles: 4, r_steps: 17, theta_steps: 4, phase_steps: 2 };
    let coarse = measure_c3(&s, 100, &sigma, &grid.points(100).unwrap()).unwrap();
    let fine = measure_c3(&s, 100, &sigma, &grid.refined().points(100).unwrap()).unwrap();
    assert!((fine.c3_hat - coarse.c3_hat).abs() < 0.05 * coarse.c3_hat, "{coarse:?} {fine:?}");
}

#[test]
fn trivial_scenario_needs_only_a_positive_constant() {
    let r = positivity_search(
        &ScenarioH::trivial(),
        &[50],
        &[50],
        &AnnulusGrid { z_radii: vec![0.0, 1.0, 2.0], z_angles: 4, r_steps: 3, theta_steps: 2, phase_steps: 2 },
        &SearchOptions { c2_samples: 501, ..Default::default() },
    )
    .unwrap();
    assert!(r.c0_star < 1e-5, "{}", r.c0_star);
    assert_eq!(r.rows[0].c3.c3_hat, 0.0);
}

fn arb_annulus_point(n: u32) -> impl Strategy<Value = ResolvedPoint> {
    (
        0.0..2.0f64,
        0.0..std::f64::consts::TAU,
        1.0..2.0f64,
        0.0..std::f64::consts::FRAC_PI_2,
        0.0..std::f64::consts::TAU,
        0.0..std::f64::consts::TAU,
    )
        .prop_map(move |(zr, za, frac, th, pu, pv)| {
            ResolvedPoint::from_polar(Complex64::from_polar(zr, za), frac / n as f64, th, pu, pv).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_alpha_block_equals_direct_expansion(seed in 0u64..1000, p in arb_annulus_point(120)) {
        let s = ScenarioH::random(seed);
        let sigma = SmoothStep::sigma();
        let lhs = h1_term_expansion(&s, 120, &sigma, &p).unwrap();
        let rhs = alpha_rhs(&alpha_matrix(&s, 120, &sigma, &p).unwrap(), 120);
        prop_assert!(lhs.is_hermitian(1e-12));
        let scale = lhs.max_abs().max(1e-300);
        prop_assert!(max_abs(&(lhs.e - rhs.e)) <= 1e-10 * scale);
    }

    #[test]
    fn e_matrix_is_hermitian(seed in 0u64..1000, p in arb_annulus_point(80), c0 in 0.0..100.0f64, c3 in 0.0..5.0f64) {
        let e = e_matrix(&ScenarioH::random(seed), c0, 80, &SmoothStep::sigma(), &p, c3).unwrap();
        prop_assert!(e.is_hermitian(1e-13));
    }

    #[test]
    fn h2_term_is_real(seed in 0u64..1000, p in arb_annulus_point(60)) {
        let t = h2_term(&ScenarioH::random(seed), 60, &SmoothStep::sigma(), &p).unwrap();
        prop_assert!(t.is_hermitian(1e-12));
    }
}
