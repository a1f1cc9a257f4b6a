use conifold_core::frame::{form_square_root, positivity, CMatrix3, FrameForm, Lambda22, PositivityClass};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn arb_form(max_deg: u32) -> impl Strategy<Value = FrameForm> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0u8..64), 1..6).prop_map(move |terms| {
        let mut f = FrameForm::zero();
        for (re, im, m) in terms {
            let m = m as usize;
            if (m as u32).count_ones() > max_deg {
                continue;
            }
            let holo: Vec<usize> = (0..3).filter(|k| m & (1 << k) != 0).collect();
            let anti: Vec<usize> = (0..3).filter(|k| m & (1 << (k + 3)) != 0).collect();
            let mut mono = FrameForm::scalar(c(re, im));
            for &h in &holo {
                mono = mono.wedge(&FrameForm::lambda(h)).unwrap();
            }
            for &a in &anti {
                mono = mono.wedge(&FrameForm::lambda_bar(a)).unwrap();
            }
            f += mono;
        }
        f
    })
}

fn homogeneous_part(f: &FrameForm, deg: u32) -> FrameForm {
    let mut out = FrameForm::zero();
    let mut coeffs = *f.coeffs();
    for (m, v) in coeffs.iter_mut().enumerate() {
        if (m as u32).count_ones() != deg {
            *v = c(0.0, 0.0);
        }
    }
    for (m, v) in coeffs.iter().enumerate() {
        if *v != c(0.0, 0.0) {
            let holo: Vec<usize> = (0..3).filter(|k| m & (1 << k) != 0).collect();
            let anti: Vec<usize> = (0..3).filter(|k| m & (1 << (k + 3)) != 0).collect();
            let mut mono = FrameForm::scalar(*v);
            for &h in &holo {
                mono = mono.wedge(&FrameForm::lambda(h)).unwrap();
            }
            for &a in &anti {
                mono = mono.wedge(&FrameForm::lambda_bar(a)).unwrap();
            }
            out += mono;
        }
    }
    out
}

fn arb_invertible() -> impl Strategy<Value = CMatrix3> {
    prop::array::uniform18(-1.0f64..1.0).prop_filter_map("well conditioned", |v| {
        let a = CMatrix3::from_fn(|i, j| c(v[2 * (3 * i + j)], v[2 * (3 * i + j) + 1]));
        (a.determinant().norm() > 0.05).then_some(a)
    })
}

/// Signed 2×2 minors: `e_ij = 2 σ_ij M_ij(W)` for `(Σ W_kl λ_{kl̄})²`, with
/// `σ = −1` exactly on the corner entries (0,2), (2,0).
fn square_by_minors(w: &CMatrix3) -> CMatrix3 {
    CMatrix3::from_fn(|i, j| {
        let rows: Vec<usize> = (0..3).filter(|&r| r != i).collect();
        let cols: Vec<usize> = (0..3).filter(|&r| r != j).collect();
        let m = w[(rows[0], cols[0])] * w[(rows[1], cols[1])] - w[(rows[0], cols[1])] * w[(rows[1], cols[0])];
        let sign = if (i, j) == (0, 2) || (i, j) == (2, 0) { -1.0 } else { 1.0 };
        m * c(2.0 * sign, 0.0)
    })
}

/// Inverts `square_by_minors` in closed form: the signed minors give the
/// adjugate, and `W = √det(adj W) · adj(W)⁻¹`.
fn root_by_adjugate(e: &CMatrix3) -> CMatrix3 {
    let cof = CMatrix3::from_fn(|i, j| {
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        let corner = if (i, j) == (0, 2) || (i, j) == (2, 0) { -1.0 } else { 1.0 };
        e[(i, j)] * c(0.5 * sign * corner, 0.0)
    });
    let adj = cof.transpose();
    let det_w = adj.determinant().re.sqrt();
    adj.try_inverse().unwrap() * c(det_w, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wedge_is_graded_anticommutative(a in arb_form(3), b in arb_form(3), p in 0u32..4, q in 0u32..4) {
        let (a, b) = (homogeneous_part(&a, p), homogeneous_part(&b, q));
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(ab.max_abs_diff(&(ba * sign)) < 1e-14);
    }

    #[test]
    fn wedge_is_associative(a in arb_form(2), b in arb_form(2), d in arb_form(2)) {
        let l = a.wedge(&b).unwrap().wedge(&d).unwrap();
        let r = a.wedge(&b.wedge(&d).unwrap()).unwrap();
        prop_assert!(l.max_abs_diff(&r) < 1e-13);
    }

    #[test]
    fn wedge_is_bilinear(a in arb_form(3), b in arb_form(3), d in arb_form(3), s in -2.0f64..2.0) {
        let l = a.wedge(&(b * s + d)).unwrap();
        let r = a.wedge(&b).unwrap() * s + a.wedge(&d).unwrap();
        prop_assert!(l.max_abs_diff(&r) < 1e-13);
    }

    #[test]
    fn lambda22_roundtrip(v in prop::array::uniform18(-3.0f64..3.0)) {
        let e = CMatrix3::from_fn(|i, j| c(v[2 * (3 * i + j)], v[2 * (3 * i + j) + 1]));
        let back = Lambda22::new(e).to_form().to_lambda22().unwrap().e;
        prop_assert!((back - e).iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn real_forms_have_hermitian_coordinates(a in arb_invertible(), b in arb_invertible()) {
        let w1 = FrameForm::from_matrix_11(&(a * a.adjoint()));
        let w2 = FrameForm::from_matrix_11(&(b * b.adjoint() - a * a.adjoint()));
        let f = w1.wedge(&w2).unwrap();
        prop_assert!(f.is_real(1e-13));
        prop_assert!(f.to_lambda22().unwrap().is_hermitian(1e-13));
    }

    #[test]
    fn square_matches_signed_minors(a in arb_invertible()) {
        let w = a * a.adjoint();
        let f = FrameForm::from_matrix_11(&w);
        let e = f.wedge(&f).unwrap().to_lambda22().unwrap().e;
        let oracle = square_by_minors(&w);
        prop_assert!((e - oracle).iter().all(|x| x.norm() < 1e-13 * (1.0 + w.norm().powi(2))));
    }

    #[test]
    fn square_root_recovers_random_positive_forms(a in arb_invertible()) {
        let w = a * a.adjoint();
        let f = FrameForm::from_matrix_11(&w);
        let sq = f.wedge(&f).unwrap();
        prop_assert_eq!(positivity(&sq).unwrap().class, PositivityClass::Positive);
        let root = form_square_root(&sq).unwrap();
        let scale = w.iter().map(|x| x.norm()).fold(0.0, f64::max);
        prop_assert!(root.max_abs_diff(&f) < 1e-9 * scale);
        let closed = root_by_adjugate(&sq.to_lambda22().unwrap().e);
        prop_assert!((closed - w).iter().all(|x| x.norm() < 1e-9 * scale));
    }
}

#[test]
fn conjugation_is_an_involution_and_swaps_bidegree() {
    let f = FrameForm::lambda(0).wedge(&FrameForm::lambda(2)).unwrap() * c(0.3, -1.2)
        + FrameForm::lambda_bar(1) * c(2.0, 0.5);
    let g = f.conjugate();
    assert_eq!(g.conjugate(), f);
    let h = FrameForm::lambda(0).wedge(&FrameForm::lambda_bar(1)).unwrap();
    assert_eq!(h.bidegree(), Some((1, 1)));
    assert_eq!(FrameForm::lambda(1).conjugate().bidegree(), Some((0, 1)));
}
