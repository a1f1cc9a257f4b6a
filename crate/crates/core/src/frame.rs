//! Exterior algebra on the coframe `{λ₁, λ₂, λ₃, λ̄₁, λ̄₂, λ̄₃}` of a complex
//! threefold.
//!
//! A [`FrameForm`] stores one complex coefficient per monomial. Monomials are
//! bitmasks over the six generators, bit `k` for `λ_{k+1}` and bit `k + 3` for
//! `λ̄_{k+1}`, always written in increasing bit order.
//!
//! `(2,2)`-forms are expressed in the basis
//! `Λ_{ij̄} = λ_{kk̄} ∧ λ_{l₁l̄₂}` with `{i,k,l₁} = {j,k,l₂} = {1,2,3}` and
//! `λ_{kl̄} = i λ_k ∧ λ̄_l`; [`Lambda22`] holds the coefficient matrix `e`.
//! Indices in this module are zero based.
//!
//! In this basis the square of `ω = Σ W_{kl} λ_{kl̄}` has
//! `e = 2 (2 diag(A) − A)` with `A = adj(W)ᵀ`, so positivity of a `(2,2)`-form
//! is governed by the matrix obtained from `e` by negating every off-diagonal
//! entry ([`Lambda22::positivity_matrix`]). Its first two leading minors
//! coincide with those of `e`; the determinants differ by `4 Re(e₁₂ e₂₃ e₃₁)`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, SMatrix, SVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const DIM: usize = 64;
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub type CMatrix3 = Matrix3<Complex64>;

fn holo_bits(m: usize) -> usize {
    m & 0b000111
}

fn anti_bits(m: usize) -> usize {
    (m >> 3) & 0b111
}

fn degree_of(m: usize) -> u32 {
    m.count_ones()
}

/// Sign of sorting the concatenation of monomials `a` and `b`.
fn merge_sign(a: usize, b: usize) -> f64 {
    let mut inversions = 0;
    let mut rest = b;
    while rest != 0 {
        let y = rest.trailing_zeros();
        inversions += (a >> (y + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Copy, PartialEq)]
pub struct FrameForm {
    c: [Complex64; DIM],
}

impl std::fmt::Debug for FrameForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut m = f.debug_map();
        for (k, v) in self.c.iter().enumerate().filter(|(_, v)| **v != ZERO) {
            m.entry(&format!("{k:06b}"), v);
        }
        m.finish()
    }
}

impl Default for FrameForm {
    fn default() -> Self {
        Self::zero()
    }
}

impl FrameForm {
    pub fn zero() -> Self {
        Self { c: [ZERO; DIM] }
    }

    pub fn scalar(v: Complex64) -> Self {
        let mut f = Self::zero();
        f.c[0] = v;
        f
    }

    /// `λ_{k+1}`.
    pub fn lambda(k: usize) -> Self {
        assert!(k < 3);
        let mut f = Self::zero();
        f.c[1 << k] = Complex64::new(1.0, 0.0);
        f
    }

    /// `λ̄_{k+1}`.
    pub fn lambda_bar(k: usize) -> Self {
        assert!(k < 3);
        let mut f = Self::zero();
        f.c[1 << (k + 3)] = Complex64::new(1.0, 0.0);
        f
    }

    /// `λ_{kl̄} = i λ_k ∧ λ̄_l`.
    pub fn lambda_kl(k: usize, l: usize) -> Self {
        assert!(k < 3 && l < 3);
        let mut f = Self::zero();
        f.c[(1 << k) | (1 << (l + 3))] = I;
        f
    }

    /// `Σ_{kl} w[k][l] λ_{kl̄}`.
    pub fn from_matrix_11(w: &CMatrix3) -> Self {
        let mut f = Self::zero();
        for k in 0..3 {
            for l in 0..3 {
                f.c[(1 << k) | (1 << (l + 3))] = I * w[(k, l)];
            }
        }
        f
    }

    /// `Σ_k v[k] λ_k`.
    pub fn from_holomorphic(v: &[Complex64; 3]) -> Self {
        let mut f = Self::zero();
        for k in 0..3 {
            f.c[1 << k] = v[k];
        }
        f
    }

    /// Coefficient of the monomial `λ_H ∧ λ̄_A` given as sorted index lists.
    pub fn coefficient(&self, holo: &[usize], anti: &[usize]) -> Complex64 {
        let mut m = 0;
        for &h in holo {
            m |= 1 << h;
        }
        for &a in anti {
            m |= 1 << (a + 3);
        }
        self.c[m]
    }

    pub fn coeffs(&self) -> &[Complex64; DIM] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|v| *v == ZERO)
    }

    /// Largest degree carrying a nonzero coefficient, `None` for the zero form.
    pub fn max_degree(&self) -> Option<u32> {
        (0..DIM).filter(|&m| self.c[m] != ZERO).map(degree_of).max()
    }

    /// `(p, q)` if every nonzero monomial has `p` holomorphic and `q` antiholomorphic factors.
    pub fn bidegree(&self) -> Option<(u32, u32)> {
        let mut found = None;
        for m in (0..DIM).filter(|&m| self.c[m] != ZERO) {
            let pq = (holo_bits(m).count_ones(), anti_bits(m).count_ones());
            match found {
                None => found = Some(pq),
                Some(x) if x != pq => return None,
                _ => {}
            }
        }
        found
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if let (Some(a), Some(b)) = (self.max_degree(), other.max_degree()) {
            if a + b > 6 {
                return Err(Error::Degree(format!("degrees {a} + {b} exceed 6")));
            }
        }
        let mut out = Self::zero();
        for a in (0..DIM).filter(|&a| self.c[a] != ZERO) {
            for b in (0..DIM).filter(|&b| other.c[b] != ZERO && b & a == 0) {
                out.c[a | b] += self.c[a] * other.c[b] * merge_sign(a, b);
            }
        }
        Ok(out)
    }

    /// Complex conjugate, `λ_k ↔ λ̄_k` with coefficients conjugated.
    pub fn conjugate(&self) -> Self {
        let mut out = Self::zero();
        for m in (0..DIM).filter(|&m| self.c[m] != ZERO) {
            let (h, a) = (holo_bits(m), anti_bits(m));
            let image = a | (h << 3);
            let sign = if (h.count_ones() * a.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
            out.c[image] = self.c[m].conj() * sign;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.c.iter().zip(other.c.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Whether the form equals its conjugate up to `tol` relative to its largest coefficient.
    pub fn is_real(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.conjugate()) <= tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// The matrix `w` with `self = Σ w[k][l] λ_{kl̄}`.
    pub fn to_matrix_11(&self) -> Result<CMatrix3> {
        check_only(self, |m| holo_bits(m).count_ones() == 1 && anti_bits(m).count_ones() == 1, "(1,1)")?;
        let mut w = CMatrix3::zeros();
        for k in 0..3 {
            for l in 0..3 {
                w[(k, l)] = self.c[(1 << k) | (1 << (l + 3))] / I;
            }
        }
        Ok(w)
    }

    /// Coordinates of a `(2,2)`-form in the `Λ_{ij̄}` basis.
    pub fn to_lambda22(&self) -> Result<Lambda22> {
        check_only(self, |m| holo_bits(m).count_ones() == 2 && anti_bits(m).count_ones() == 2, "(2,2)")?;
        let basis = lambda_basis_signs();
        let mut e = CMatrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let (m, sign) = basis[i][j];
                e[(i, j)] = self.c[m] * sign;
            }
        }
        Ok(Lambda22 { e })
    }
}

fn check_only(f: &FrameForm, keep: impl Fn(usize) -> bool, name: &str) -> Result<()> {
    match (0..DIM).find(|&m| f.c[m] != ZERO && !keep(m)) {
        Some(m) => Err(Error::Type(format!(
            "expected a pure {name} form, found monomial {m:06b} of bidegree ({}, {})",
            holo_bits(m).count_ones(),
            anti_bits(m).count_ones()
        ))),
        None => Ok(()),
    }
}

/// The basis form `Λ_{ij̄}`.
pub fn lambda_basis(i: usize, j: usize) -> FrameForm {
    assert!(i < 3 && j < 3);
    let (k, l1, l2) = if i != j {
        (3 - i - j, j, i)
    } else {
        let others: Vec<usize> = (0..3).filter(|&x| x != i).collect();
        (others[0], others[1], others[1])
    };
    FrameForm::lambda_kl(k, k).wedge(&FrameForm::lambda_kl(l1, l2)).expect("a (2,2)-form fits in dimension 3")
}

/// For each `Λ_{ij̄}`: its unique monomial and the reciprocal of its coefficient there.
fn lambda_basis_signs() -> &'static [[(usize, f64); 3]; 3] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[[(usize, f64); 3]; 3]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[(0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let f = lambda_basis(i, j);
                let m = (0..DIM).find(|&m| f.c[m] != ZERO).expect("basis form is nonzero");
                let v = f.c[m];
                debug_assert!(v.im == 0.0 && v.re.abs() == 1.0);
                t[i][j] = (m, 1.0 / v.re);
            }
        }
        t
    })
}

impl Add for FrameForm {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for FrameForm {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
    }
}

impl Sub for FrameForm {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        self
    }
}

impl Neg for FrameForm {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<Complex64> for FrameForm {
    type Output = Self;
    fn mul(mut self, rhs: Complex64) -> Self {
        self.c.iter_mut().for_each(|v| *v *= rhs);
        self
    }
}

impl Mul<f64> for FrameForm {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self.c.iter_mut().for_each(|v| *v *= rhs);
        self
    }
}

/// A `(2,2)`-form `Σ e[i][j] Λ_{ij̄}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambda22 {
    pub e: CMatrix3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityClass {
    Positive,
    Semidefinite,
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub class: PositivityClass,
    /// Leading principal minors of the positivity matrix.
    pub minors: [f64; 3],
    /// Leading principal minors of the raw coefficient matrix `e`.
    pub coefficient_minors: [f64; 3],
}

/// Relative tolerance below which a minor counts as zero.
pub const MINOR_TOL: f64 = 1e-12;

impl Lambda22 {
    pub fn new(e: CMatrix3) -> Self {
        Self { e }
    }

    pub fn to_form(&self) -> FrameForm {
        let basis = lambda_basis_signs();
        let mut f = FrameForm::zero();
        for i in 0..3 {
            for j in 0..3 {
                let (m, sign) = basis[i][j];
                f.c[m] += self.e[(i, j)] * sign;
            }
        }
        f
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (self.e - self.e.adjoint()).iter().all(|v| v.norm() <= tol * scale)
    }

    pub fn max_abs(&self) -> f64 {
        self.e.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Leading principal minors of the raw coefficient matrix `e`.
    pub fn leading_minors(&self) -> [f64; 3] {
        leading_minors(&self.e)
    }

    /// `e` with every off-diagonal entry negated: the Hermitian matrix whose
    /// definiteness decides positivity of the form. For `Ω = ω²` it equals
    /// `2 adj(W)ᵀ`.
    pub fn positivity_matrix(&self) -> CMatrix3 {
        CMatrix3::from_fn(|i, j| if i == j { self.e[(i, j)] } else { -self.e[(i, j)] })
    }

    /// Sylvester classification of the positivity matrix: `Positive` when all
    /// leading minors are positive beyond the tolerance, `Semidefinite` when
    /// every principal minor is nonnegative within it, `Indefinite` otherwise.
    pub fn classify(&self) -> Result<PositivityReport> {
        if !self.is_hermitian(1e-10) {
            return Err(Error::Type("(2,2)-form is not real: coefficient matrix is not Hermitian".into()));
        }
        let p = self.positivity_matrix();
        let (class, minors) = sylvester(&p);
        Ok(PositivityReport { class, minors, coefficient_minors: self.leading_minors() })
    }

    /// Smallest eigenvalue of the Hermitian part of the positivity matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.positivity_matrix())
    }
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &CMatrix3) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Real parts of the three leading principal minors.
pub fn leading_minors(e: &CMatrix3) -> [f64; 3] {
    let m1 = e[(0, 0)].re;
    let m2 = (e[(0, 0)] * e[(1, 1)] - e[(0, 1)] * e[(1, 0)]).re;
    [m1, m2, e.determinant().re]
}

/// Sylvester test of a Hermitian matrix with relative zero tolerance [`MINOR_TOL`].
///
/// The test runs on `D⁻¹eD⁻¹` with `D = diag(|e_ii|^{1/2})` when every diagonal
/// entry is nonzero; the congruence preserves inertia and makes the tolerance
/// insensitive to row scaling. Reported minors are those of `e`.
pub fn sylvester(e: &CMatrix3) -> (PositivityClass, [f64; 3]) {
    let minors = leading_minors(e);
    let d = [0, 1, 2].map(|i| e[(i, i)].re.abs().sqrt());
    let e = &if d.iter().all(|&x| x > 0.0) { CMatrix3::from_fn(|i, j| e[(i, j)] / (d[i] * d[j])) } else { *e };
    let scale = e.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let scaled_minors = leading_minors(e);
    let tol = |k: i32| MINOR_TOL * scale.powi(k);
    let class = if scaled_minors.iter().enumerate().all(|(k, &m)| m > tol(k as i32 + 1)) {
        PositivityClass::Positive
    } else {
        let mut principal = vec![(e[(0, 0)].re, 1), (e[(1, 1)].re, 1), (e[(2, 2)].re, 1)];
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            principal.push(((e[(a, a)] * e[(b, b)] - e[(a, b)] * e[(b, a)]).re, 2));
        }
        principal.push((scaled_minors[2], 3));
        if principal.iter().all(|&(m, k)| m >= -tol(k)) {
            PositivityClass::Semidefinite
        } else {
            PositivityClass::Indefinite
        }
    };
    (class, minors)
}

/// Classifies a real `(2,2)`-form.
pub fn positivity(form: &FrameForm) -> Result<PositivityReport> {
    form.to_lambda22()?.classify()
}

const PARAMS: usize = 9;

fn hermitian_from_params(p: &[f64; PARAMS]) -> CMatrix3 {
    let c = Complex64::new;
    let (a, b, d) = (c(p[3], p[4]), c(p[5], p[6]), c(p[7], p[8]));
    CMatrix3::new(c(p[0], 0.0), a, b, a.conj(), c(p[1], 0.0), d, b.conj(), d.conj(), c(p[2], 0.0))
}

fn params_from_hermitian(w: &CMatrix3) -> [f64; PARAMS] {
    [
        w[(0, 0)].re,
        w[(1, 1)].re,
        w[(2, 2)].re,
        w[(0, 1)].re,
        w[(0, 1)].im,
        w[(0, 2)].re,
        w[(0, 2)].im,
        w[(1, 2)].re,
        w[(1, 2)].im,
    ]
}

fn unit_param(j: usize) -> CMatrix3 {
    let mut p = [0.0; PARAMS];
    p[j] = 1.0;
    hermitian_from_params(&p)
}

fn square_coords(w: &CMatrix3) -> CMatrix3 {
    let f = FrameForm::from_matrix_11(w);
    f.wedge(&f).and_then(|g| g.to_lambda22()).expect("square of a (1,1)-form is (2,2)").e
}

fn is_positive_definite(w: &CMatrix3) -> bool {
    w.cholesky().is_some()
}

fn residual(w: &CMatrix3, target: &CMatrix3) -> SVector<f64, PARAMS> {
    SVector::from(params_from_hermitian(&(square_coords(w) - target)))
}

fn newton_root(target: &CMatrix3, start: CMatrix3, max_iter: usize) -> Option<CMatrix3> {
    let scale = target.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut w = start;
    let mut r = residual(&w, target);
    for _ in 0..max_iter {
        if r.amax() <= 1e-14 * scale {
            return Some(w);
        }
        let omega = FrameForm::from_matrix_11(&w);
        let mut jac = SMatrix::<f64, PARAMS, PARAMS>::zeros();
        for j in 0..PARAMS {
            let dj = FrameForm::from_matrix_11(&unit_param(j));
            let col = omega.wedge(&dj).ok()?.to_lambda22().ok()?.e * Complex64::new(2.0, 0.0);
            jac.set_column(j, &SVector::from(params_from_hermitian(&col)));
        }
        let step = jac.lu().solve(&(-r))?;
        let p0 = SVector::from(params_from_hermitian(&w));
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let p = p0 + step * alpha;
            let trial = hermitian_from_params(&p.into());
            if is_positive_definite(&trial) {
                let rt = residual(&trial, target);
                if rt.norm() < r.norm() {
                    w = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return (r.amax() <= 1e-12 * scale).then_some(w);
        }
    }
    (r.amax() <= 1e-12 * scale).then_some(w)
}

/// The positive `(1,1)`-form `ω` with `ω ∧ ω = Ω` for a positive `(2,2)`-form `Ω`.
///
/// Damped Newton on the nine real parameters of a Hermitian coefficient matrix,
/// started from the diagonal solution of the diagonal of `Ω`. If the direct
/// iteration stalls, the target is approached along the segment from the
/// square of the starting point, which stays inside the positive cone.
pub fn form_square_root(omega2: &FrameForm) -> Result<FrameForm> {
    let l = omega2.to_lambda22()?;
    let report = l.classify()?;
    if report.class != PositivityClass::Positive {
        return Err(Error::Positivity(format!(
            "square root needs a positive (2,2)-form, leading minors {:?}",
            report.minors
        )));
    }
    let e = (l.e + l.e.adjoint()) * Complex64::new(0.5, 0.0);
    let d = [e[(0, 0)].re, e[(1, 1)].re, e[(2, 2)].re];
    let seed = CMatrix3::from_diagonal(&nalgebra::Vector3::new(
        Complex64::new((d[1] * d[2] / (2.0 * d[0])).sqrt(), 0.0),
        Complex64::new((d[0] * d[2] / (2.0 * d[1])).sqrt(), 0.0),
        Complex64::new((d[0] * d[1] / (2.0 * d[2])).sqrt(), 0.0),
    ));
    let w = newton_root(&e, seed, 60).or_else(|| {
        let base = square_coords(&seed);
        [16usize, 128].into_iter().find_map(|steps| {
            let mut w = seed;
            for k in 1..=steps {
                let s = k as f64 / steps as f64;
                let target = base * Complex64::new(1.0 - s, 0.0) + e * Complex64::new(s, 0.0);
                w = newton_root(&target, w, 60)?;
            }
            Some(w)
        })
    });
    let w = w.ok_or_else(|| Error::Convergence("square root iteration did not converge".into()))?;
    let root = FrameForm::from_matrix_11(&w);
    let back = root.wedge(&root)?;
    let err = back.max_abs_diff(omega2);
    if err > 1e-10 * omega2.max_abs() {
        return Err(Error::Convergence(format!("square root residual {err:e} above tolerance")));
    }
    if !is_positive_definite(&w) {
        return Err(Error::Convergence("square root iteration left the positive cone".into()));
    }
    Ok(root)
}

/// A seeded random positive `(1,1)`-form `Σ W_{kl} λ_{kl̄}` with `W = A A* + I/5`,
/// the entries of `A` uniform in the unit square.
pub fn random_positive_form(seed: u64) -> FrameForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix3::from_fn(|_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let w = a * a.adjoint() + CMatrix3::identity() * Complex64::new(0.2, 0.0);
    FrameForm::from_matrix_11(&w)
}
