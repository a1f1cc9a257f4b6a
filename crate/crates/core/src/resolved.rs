//! Geometry of the resolved conifold near its exceptional curve `E`.
//!
//! Points carry coordinates `(z, u, v)` on the disk bundle `U ⊂ L ⊕ L`, with
//! `𝐫² = (1 + |z|²)(|u|² + |v|²)` and `Γ = (1 + |z|²)^{1/2}`. Forms are written
//! in the frame
//! `λ₁ = dz`, `λ₂ = (ū du + v̄ dv)/ρ`, `λ₃ = (v du − u dv)/ρ`, `ρ² = |u|² + |v|²`.
//!
//! Two independent routes are provided. Closed-form frame expressions cover
//! the cone and smooth metrics, the glued form `Φ`, the `c`/`d`/`α`
//! coefficient blocks and the `e` matrix. Direct expansions push exact
//! coordinate derivatives through the frame change and wedge the results with
//! [`FrameForm`]. Tests and the positivity report compare the two.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::{ChiSpec, SmoothStep};
use crate::error::domain;
use crate::frame::{min_eigenvalue, sylvester, CMatrix3, FrameForm, Lambda22, PositivityClass};
use crate::radial::{self, ProfileKind};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn outer(a: &[Complex64; 3], b: &[Complex64; 3]) -> CMatrix3 {
    CMatrix3::from_fn(|i, j| a[i] * b[j].conj())
}

/// Relative slack allowed on the annulus bounds `1 ≤ n𝐫 ≤ 2`.
const ANNULUS_SLACK: f64 = 1e-9;

/// A point of `U(1) ∖ E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPoint {
    pub z: Complex64,
    pub u: Complex64,
    pub v: Complex64,
}

impl ResolvedPoint {
    pub fn new(z: Complex64, u: Complex64, v: Complex64) -> Result<Self> {
        let p = Self { z, u, v };
        if ![z, u, v].iter().all(|c| c.is_finite()) {
            return domain("non-finite coordinates");
        }
        if p.rho() == 0.0 {
            return domain("(u, v) = (0, 0) lies on the exceptional curve");
        }
        if !(p.r() < 1.0) {
            return domain(format!("𝐫 = {} is outside the unit disk bundle", p.r()));
        }
        Ok(p)
    }

    /// The point over `z` with `𝐫 = r`, `|u| = ρ cos θ`, `|v| = ρ sin θ` and
    /// the given phases of `u` and `v`.
    pub fn from_polar(z: Complex64, r: f64, theta: f64, phase_u: f64, phase_v: f64) -> Result<Self> {
        let rho = r / (1.0 + z.norm_sqr()).sqrt();
        Self::new(
            z,
            Complex64::from_polar(rho * theta.cos(), phase_u),
            Complex64::from_polar(rho * theta.sin(), phase_v),
        )
    }

    /// `Γ = (1 + |z|²)^{1/2}`.
    pub fn gamma(&self) -> f64 {
        (1.0 + self.z.norm_sqr()).sqrt()
    }

    /// `ρ = (|u|² + |v|²)^{1/2}`.
    pub fn rho(&self) -> f64 {
        (self.u.norm_sqr() + self.v.norm_sqr()).sqrt()
    }

    pub fn r2(&self) -> f64 {
        (1.0 + self.z.norm_sqr()) * (self.u.norm_sqr() + self.v.norm_sqr())
    }

    pub fn r(&self) -> f64 {
        self.r2().sqrt()
    }

    /// `𝐭 = n²𝐫²`.
    pub fn t_param(&self, n: f64) -> f64 {
        n * n * self.r2()
    }

    /// `𝐬 = n^{4/3}(𝐫²)^{2/3}`.
    pub fn s_param(&self, n: f64) -> f64 {
        (n * n * self.r2()).powf(2.0 / 3.0)
    }

    /// The point with fiber coordinates multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.z, self.u * c, self.v * c)
    }

    /// Matrix `P` with `dx_i = Σ_k P_{ik} λ_k` for `x = (z, u, v)`.
    pub fn frame_change(&self) -> CMatrix3 {
        let rho = self.rho();
        let (u, v) = (self.u / rho, self.v / rho);
        CMatrix3::new(ONE, ZERO, ZERO, ZERO, u, v.conj(), ZERO, v, -u.conj())
    }

    /// Frame coefficients of the `(1,0)`-form `Σ c_i dx_i`.
    pub fn to_frame_10(&self, c: &[Complex64; 3]) -> [Complex64; 3] {
        let p = self.frame_change();
        std::array::from_fn(|k| (0..3).map(|i| p[(i, k)] * c[i]).sum())
    }

    /// Frame matrix of the `(1,1)`-form `Σ M_{ij} i dx_i ∧ dx̄_j`.
    pub fn to_frame_11(&self, m: &CMatrix3) -> CMatrix3 {
        let p = self.frame_change();
        p.transpose() * m * p.map(|c| c.conj())
    }

    fn vars(&self) -> [Complex64; 6] {
        [self.z, self.z.conj(), self.u, self.u.conj(), self.v, self.v.conj()]
    }
}

/// Variable indices of [`Polynomial`] exponents.
pub mod var {
    pub const Z: usize = 0;
    pub const ZBAR: usize = 1;
    pub const U: usize = 2;
    pub const UBAR: usize = 3;
    pub const V: usize = 4;
    pub const VBAR: usize = 5;
}

/// `coeff · z^{e₀} z̄^{e₁} u^{e₂} ū^{e₃} v^{e₄} v̄^{e₅}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: Complex64,
    pub exps: [u32; 6],
}

/// Polynomial in `z, z̄, u, ū, v, v̄` treated as independent variables, so the
/// Wirtinger derivatives are formal derivatives.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    pub fn monomial(coeff: Complex64, exps: [u32; 6]) -> Self {
        Self { terms: vec![Monomial { coeff, exps }] }
    }

    pub fn eval(&self, p: &ResolvedPoint) -> Complex64 {
        let x = p.vars();
        self.terms.iter().map(|m| m.exps.iter().zip(x).fold(m.coeff, |acc, (&e, xi)| acc * xi.powu(e))).sum()
    }

    pub fn diff(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|m| m.exps[var] > 0)
            .map(|m| {
                let mut exps = m.exps;
                exps[var] -= 1;
                Monomial { coeff: m.coeff * m.exps[var] as f64, exps }
            })
            .collect();
        Self { terms }
    }

    /// Complex conjugate: conjugated coefficients, barred and unbarred exponents swapped.
    pub fn conj(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|m| {
                let e = m.exps;
                Monomial { coeff: m.coeff.conj(), exps: [e[1], e[0], e[3], e[2], e[5], e[4]] }
            })
            .collect();
        Self { terms }
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Monomial { coeff: a.coeff * b.coeff, exps: std::array::from_fn(|k| a.exps[k] + b.exps[k]) });
            }
        }
        Self { terms }
    }

    pub fn sum(&self, other: &Self) -> Self {
        Self { terms: self.terms.iter().chain(&other.terms).copied().collect() }
    }

    /// Like terms merged, zero terms dropped, exponents sorted.
    pub fn simplified(&self) -> Self {
        let mut map: BTreeMap<[u32; 6], Complex64> = BTreeMap::new();
        for m in &self.terms {
            *map.entry(m.exps).or_insert(ZERO) += m.coeff;
        }
        let terms = map.into_iter().filter(|(_, c)| *c != ZERO).map(|(exps, coeff)| Monomial { coeff, exps }).collect();
        Self { terms }
    }

    /// Whether the polynomial is real valued, up to `tol` on its coefficients.
    pub fn is_real(&self, tol: f64) -> bool {
        let diff =
            self.sum(&Self { terms: self.conj().terms.iter().map(|m| Monomial { coeff: -m.coeff, ..*m }).collect() });
        diff.simplified().terms.iter().all(|m| m.coeff.norm() <= tol)
    }

    /// Smallest total degree in `u, ū, v, v̄` among the terms.
    pub fn fiber_order(&self) -> Option<u32> {
        self.simplified().terms.iter().map(|m| m.exps[2..].iter().sum()).min()
    }

    /// `(∂_z f, ∂_u f, ∂_v f)`.
    pub fn gradient(&self, p: &ResolvedPoint) -> [Complex64; 3] {
        [var::Z, var::U, var::V].map(|k| self.diff(k).eval(p))
    }

    /// Matrix `∂_i ∂_{j̄} f`, so that `i∂∂̄f = Σ M_{ij} i dx_i ∧ dx̄_j`.
    pub fn levi(&self, p: &ResolvedPoint) -> CMatrix3 {
        let holo = [var::Z, var::U, var::V];
        let anti = [var::ZBAR, var::UBAR, var::VBAR];
        CMatrix3::from_fn(|i, j| self.diff(holo[i]).diff(anti[j]).eval(p))
    }
}

/// `coeff · z^{z_pow} z̄^{zbar_pow}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTerm {
    pub coeff: Complex64,
    pub z_pow: u32,
    pub zbar_pow: u32,
}

/// Polynomial in `(z, z̄)` modelling a coefficient function on `E`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZPoly {
    pub terms: Vec<ZTerm>,
}

impl ZPoly {
    pub fn new(terms: Vec<ZTerm>) -> Self {
        Self { terms }
    }

    fn eval_with(&self, z: Complex64, dz: u32, dzbar: u32) -> Complex64 {
        let falling = |n: u32, k: u32| (0..k).map(|i| (n - i) as f64).product::<f64>();
        self.terms
            .iter()
            .filter(|t| t.z_pow >= dz && t.zbar_pow >= dzbar)
            .map(|t| {
                t.coeff
                    * falling(t.z_pow, dz)
                    * falling(t.zbar_pow, dzbar)
                    * z.powu(t.z_pow - dz)
                    * z.conj().powu(t.zbar_pow - dzbar)
            })
            .sum()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.eval_with(z, 0, 0)
    }

    pub fn d_z(&self, z: Complex64) -> Complex64 {
        self.eval_with(z, 1, 0)
    }

    pub fn d_zbar(&self, z: Complex64) -> Complex64 {
        self.eval_with(z, 0, 1)
    }

    pub fn d_z_zbar(&self, z: Complex64) -> Complex64 {
        self.eval_with(z, 1, 1)
    }

    pub fn to_polynomial(&self) -> Polynomial {
        Polynomial::new(
            self.terms.iter().map(|t| Monomial { coeff: t.coeff, exps: [t.z_pow, t.zbar_pow, 0, 0, 0, 0] }).collect(),
        )
    }
}

fn one() -> f64 {
    1.0
}

/// Decomposition `h = h₁ + h₂` of the Kähler potential correction near `E`:
/// `h₁ = 𝐚u + 𝐚̄ū + 𝐛v + 𝐛̄v̄` with `𝐚 = h_u(z,0,0)`, `𝐛 = h_v(z,0,0)`, and a
/// real remainder `h₂` vanishing to second order along `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioH {
    pub a: ZPoly,
    pub b: ZPoly,
    pub h2: Polynomial,
    /// Scale of the pulled back curve metric `ω̃_E = scale · Γ⁻⁴ λ_{11̄}`.
    #[serde(default = "one")]
    pub omega_e_scale: f64,
}

impl Default for ScenarioH {
    /// `𝐚 = 0.3 + 0.1z`, `𝐛 = 0.2 − 0.05z̄`, `h₂ = 0.1(|u|² + |v|²)(1 + 0.1 Re z)`.
    fn default() -> Self {
        let zt = |c: Complex64, p, q| ZTerm { coeff: c, z_pow: p, zbar_pow: q };
        let fiber = Polynomial::new(vec![
            Monomial { coeff: re(0.1), exps: [0, 0, 1, 1, 0, 0] },
            Monomial { coeff: re(0.1), exps: [0, 0, 0, 0, 1, 1] },
        ]);
        let base = Polynomial::new(vec![
            Monomial { coeff: ONE, exps: [0; 6] },
            Monomial { coeff: re(0.05), exps: [1, 0, 0, 0, 0, 0] },
            Monomial { coeff: re(0.05), exps: [0, 1, 0, 0, 0, 0] },
        ]);
        Self {
            a: ZPoly::new(vec![zt(re(0.3), 0, 0), zt(re(0.1), 1, 0)]),
            b: ZPoly::new(vec![zt(re(0.2), 0, 0), zt(re(-0.05), 0, 1)]),
            h2: fiber.product(&base).simplified(),
            omega_e_scale: 1.0,
        }
    }
}

impl ScenarioH {
    /// `h ≡ 0`.
    pub fn trivial() -> Self {
        Self { a: ZPoly::default(), b: ZPoly::default(), h2: Polynomial::default(), omega_e_scale: 1.0 }
    }

    /// A generic scenario drawn from a seeded generator: `𝐚`, `𝐛` of degree at
    /// most two in `(z, z̄)`, and `h₂` a real quadratic form in `(u, v)` with
    /// Hermitian and holomorphic parts whose coefficients are affine in `z`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cplx = |scale: f64| Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale));
        let zpoly = |cplx: &mut dyn FnMut(f64) -> Complex64| {
            let mut terms = Vec::new();
            for (p, q) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
                let scale = if p + q == 0 { 0.4 } else { 0.1 };
                terms.push(ZTerm { coeff: cplx(scale), z_pow: p, zbar_pow: q });
            }
            ZPoly::new(terms)
        };
        let a = zpoly(&mut cplx);
        let b = zpoly(&mut cplx);
        let affine = |c0: Complex64, c1: Complex64| {
            Polynomial::new(vec![
                Monomial { coeff: c0, exps: [0; 6] },
                Monomial { coeff: c1, exps: [1, 0, 0, 0, 0, 0] },
            ])
        };
        let mono = |exps: [u32; 6]| Polynomial::monomial(ONE, exps);
        let mut h2 = Polynomial::default();
        for fiber in [[0, 0, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1]] {
            let weight = affine(re(0.05 + 0.1 * cplx(1.0).re.abs()), cplx(0.02));
            let real_weight = weight.sum(&weight.conj());
            h2 = h2.sum(&real_weight.product(&mono(fiber)));
        }
        for fiber in [[0, 0, 1, 0, 0, 1], [0, 0, 1, 0, 1, 0]] {
            let part = affine(cplx(0.03), cplx(0.01)).product(&mono(fiber));
            h2 = h2.sum(&part).sum(&part.conj());
        }
        Self { a, b, h2: h2.simplified(), omega_e_scale: 1.0 }
    }

    /// Checks that `h₂` is real and vanishes with its first fiber derivatives on `E`.
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_e_scale >= 0.0 && self.omega_e_scale.is_finite()) {
            return domain(format!("ω̃_E scale must be nonnegative, got {}", self.omega_e_scale));
        }
        let scale = self.h2.terms.iter().map(|m| m.coeff.norm()).fold(1.0, f64::max);
        if !self.h2.is_real(1e-14 * scale) {
            return domain("h₂ must be real valued");
        }
        if let Some(order) = self.h2.fiber_order() {
            if order < 2 {
                return domain(format!("h₂ must vanish to second order along E, found a term of fiber degree {order}"));
            }
        }
        Ok(())
    }

    /// `h₁ = 𝐚u + 𝐚̄ū + 𝐛v + 𝐛̄v̄` as a polynomial.
    pub fn h1_polynomial(&self) -> Polynomial {
        let a = self.a.to_polynomial();
        let b = self.b.to_polynomial();
        let mono = |k: usize| {
            let mut e = [0; 6];
            e[k] = 1;
            Polynomial::monomial(ONE, e)
        };
        let au = a.product(&mono(var::U));
        let bv = b.product(&mono(var::V));
        au.sum(&au.conj()).sum(&bv).sum(&bv.conj())
    }

    pub fn h1(&self, p: &ResolvedPoint) -> f64 {
        2.0 * (self.a.eval(p.z) * p.u + self.b.eval(p.z) * p.v).re
    }

    pub fn h2_value(&self, p: &ResolvedPoint) -> f64 {
        self.h2.eval(p).re
    }
}

/// The coefficient blocks of the `Ψ` expansion at a point.
///
/// `c` holds `c_{11̄}` (real), `c_{12̄}`, `c_{13̄}`, `c_{21̄}`, `c_{31̄}`, zero
/// elsewhere; `d = (d_{12̄}, d_{22̄}, d_{32̄})`; `alpha` holds the `α_{ij̄}`
/// with `α_{11̄} = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBlock {
    pub c: CMatrix3,
    pub d: [Complex64; 3],
    pub alpha: CMatrix3,
}

/// The `c` and `d` coefficients of `i∂∂̄h₁ = 𝐫c_{11̄}λ_{11̄} + c_{21̄}λ_{21̄} + …`
/// and `∂h₁ = 𝐫d_{12̄}λ₁ + d_{22̄}λ₂ + d_{32̄}λ₃`.
pub fn coefficients_cd(s: &ScenarioH, p: &ResolvedPoint) -> CoefficientBlock {
    let (z, u, v) = (p.z, p.u, p.v);
    let g = re(p.gamma());
    let r = p.r();
    let (a, b) = (s.a.eval(z), s.b.eval(z));
    let (az, bz) = (s.a.d_z(z), s.b.d_z(z));
    let (azb, bzb) = (s.a.d_zbar(z), s.b.d_zbar(z));
    let (azzb, bzzb) = (s.a.d_z_zbar(z), s.b.d_z_zbar(z));

    let c11 = re(2.0 * ((azzb * u + bzzb * v) / r).re);
    let c21 = g * (azb * u + bzb * v) / r;
    let c31 = g * (azb * v.conj() - bzb * u.conj()) / r;
    let c = CMatrix3::new(c11, c21.conj(), c31.conj(), c21, ZERO, ZERO, c31, ZERO, ZERO);

    let d12 = (az * u + bz * v + azb.conj() * u.conj() + bzb.conj() * v.conj()) / r;
    let d22 = g * (a * u + b * v) / r;
    let d32 = g * (a * v.conj() - b * u.conj()) / r;
    CoefficientBlock { c, d: [d12, d22, d32], alpha: CMatrix3::zeros() }
}

fn check_annulus(n: u32, p: &ResolvedPoint) -> Result<()> {
    let nr = n as f64 * p.r();
    if !(1.0 - ANNULUS_SLACK..=2.0 + ANNULUS_SLACK).contains(&nr) {
        return domain(format!("n𝐫 = {nr} is outside the annulus [1, 2]"));
    }
    Ok(())
}

/// The `α_{ij̄}` coefficients on the annulus `1/n ≤ 𝐫 ≤ 2/n`, with
/// `σ′ = σ′(𝐭)`, `σ″ = σ″(𝐭)`.
pub fn alpha_matrix(s: &ScenarioH, n: u32, sigma: &SmoothStep, p: &ResolvedPoint) -> Result<CoefficientBlock> {
    check_annulus(n, p)?;
    let mut block = coefficients_cd(s, p);
    let nf = n as f64;
    let t = p.t_param(nf);
    let (sp, spp) = (sigma.eval(t, 1), sigma.eval(t, 2));
    let g = p.gamma();
    let g2 = g * g;
    let z = p.z;
    let zb = z.conj();
    let nh1 = nf * s.h1(p);
    let rt = t.sqrt();
    let c = &block.c;
    let (c11, c12, c13, c21, c31) = (c[(0, 0)], c[(0, 1)], c[(0, 2)], c[(1, 0)], c[(2, 0)]);
    let [d12, d22, d32] = block.d;
    let spt = sp + t * spp;

    let a12 = -nh1 * sp * g2 * c21 + rt * sp * g * c31 * d32.conj();
    let a22 = -nh1 * rt * sp * g2 * c11 + 2.0 * t * sp / g2 * (z * c13 * d32).re;
    let a23 = nh1 * rt * spt / g * zb * c31
        + t * sp / g2 * (zb * c31 * d22.conj() + z * c12 * d32)
        + t * sp * g * (c31 * d12 - c11 * d32);
    let a13 = -nh1 * spt * g2 * c31 - rt * sp * g * (2.0 * c31 * d22.re - c21 * d32);
    let a33 = -nh1 * rt * spt * (g2 * c11 - 2.0 / g * (z * c12).re)
        - 2.0 * t * sp * g * (c11 * d22.re - (c21 * d12).re - (z * c12 * d22).re / (g2 * g));

    block.alpha = CMatrix3::new(ZERO, a12, a13, a12.conj(), a22, a23, a13.conj(), a23.conj(), a33);
    Ok(block)
}

/// The `Λ`-matrix `nΣ_{l=2,3}(α_{1l̄}Λ_{1l̄} + α_{l1̄}Λ_{l1̄}) + Σ_{k,l=2,3} α_{kl̄}Λ_{kl̄}`.
pub fn alpha_rhs(block: &CoefficientBlock, n: u32) -> Lambda22 {
    let nf = n as f64;
    Lambda22::new(CMatrix3::from_fn(
        |i, j| if i == 0 || j == 0 { block.alpha[(i, j)] * nf } else { block.alpha[(i, j)] },
    ))
}

/// Coordinate gradient `(∂_z 𝐫², ∂_u 𝐫², ∂_v 𝐫²)`.
pub fn r2_gradient_coords(p: &ResolvedPoint) -> [Complex64; 3] {
    let g2 = 1.0 + p.z.norm_sqr();
    let rho2 = p.rho() * p.rho();
    [p.z.conj() * rho2, p.u.conj() * g2, p.v.conj() * g2]
}

/// Coordinate Levi matrix `∂_i ∂_{j̄} 𝐫²`.
pub fn r2_levi_coords(p: &ResolvedPoint) -> CMatrix3 {
    let g2 = re(1.0 + p.z.norm_sqr());
    let rho2 = re(p.rho() * p.rho());
    let zb = p.z.conj();
    CMatrix3::new(rho2, zb * p.u, zb * p.v, p.z * p.u.conj(), g2, ZERO, p.z * p.v.conj(), ZERO, g2)
}

/// Frame coefficients of `∂𝐫² = Γ⁻²𝐫²z̄λ₁ + Γ𝐫λ₂`.
pub fn r2_gradient_frame(p: &ResolvedPoint) -> [Complex64; 3] {
    let g = p.gamma();
    [p.z.conj() * (p.r2() / (g * g)), re(g * p.r()), ZERO]
}

/// Frame matrix of `i∂∂̄𝐫² = Γ⁻²𝐫²λ_{11̄} + Γ²(λ_{22̄} + λ_{33̄}) + Γ⁻¹𝐫(z̄λ_{12̄} + zλ_{21̄})`.
pub fn r2_levi_frame(p: &ResolvedPoint) -> CMatrix3 {
    let g = p.gamma();
    let g2 = re(g * g);
    let k = p.r() / g;
    CMatrix3::new(re(p.r2() / (g * g)), p.z.conj() * k, ZERO, p.z * k, g2, ZERO, ZERO, ZERO, g2)
}

/// `i∂∂̄f₀` for `f₀ = (3/2)(𝐫²)^{2/3}` from frame matrices of `∂𝐫²`, `i∂∂̄𝐫²`.
fn cone_matrix(r2: f64, grad: &[Complex64; 3], levi: &CMatrix3) -> CMatrix3 {
    levi * re(r2.powf(-1.0 / 3.0)) - outer(grad, grad) * re(r2.powf(-4.0 / 3.0) / 3.0)
}

/// The basic forms at a point, in the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseForms {
    /// `i∂∂̄𝐫²`.
    pub ddbar_r2: FrameForm,
    /// `i∂𝐫² ∧ ∂̄𝐫²`.
    pub dr2_wedge: FrameForm,
    /// The cone metric `ω_{co,0} = i∂∂̄f₀`.
    pub omega_co0: FrameForm,
    /// The smooth metric `ω_co = i∂∂̄f(𝐫²) + i∂∂̄ log(1 + |z|²)` with the resolved profile.
    pub omega_co: FrameForm,
}

pub fn base_forms(p: &ResolvedPoint) -> Result<BaseForms> {
    let r2 = p.r2();
    let grad = r2_gradient_frame(p);
    let levi = r2_levi_frame(p);
    let wedge = outer(&grad, &grad);
    let jet = radial::f_prime_jet(ProfileKind::Resolved, r2)?;
    let (f1, f2) = (jet.derivative(0), jet.derivative(1));
    let g2 = 1.0 + p.z.norm_sqr();
    let mut co = levi * re(f1) + wedge * re(f2);
    co[(0, 0)] += 1.0 / (g2 * g2);
    Ok(BaseForms {
        ddbar_r2: FrameForm::from_matrix_11(&levi),
        dr2_wedge: FrameForm::from_matrix_11(&wedge),
        omega_co0: FrameForm::from_matrix_11(&cone_matrix(r2, &grad, &levi)),
        omega_co: FrameForm::from_matrix_11(&co),
    })
}

/// Diagonal of `ω_{co,0}` at `z = 0`: `((𝐫²)^{2/3}, (2/3)(𝐫²)^{−1/3}, (𝐫²)^{−1/3})`.
pub fn omega_co0_z0_display(r2: f64) -> [f64; 3] {
    let c = r2.cbrt();
    [c * c, 2.0 / (3.0 * c), 1.0 / c]
}

/// Diagonal of `ω_co` at `z = 0`:
/// `(η + 1, (2/3)(η + 3/2)^{1/2}/(η + 1), (η + 3/2)^{−1/2})`.
pub fn omega_co_z0_display(r2: f64) -> Result<[f64; 3]> {
    let eta = radial::eta(ProfileKind::Resolved, r2)?;
    let q = (eta + 1.5).sqrt();
    Ok([eta + 1.0, 2.0 * q / (3.0 * (eta + 1.0)), 1.0 / q])
}

/// `Φ = χ′ω_{co,0}² + (2/3)n^{4/3}(𝐫²)^{−2/3}χ″ (i∂𝐫² ∧ ∂̄𝐫²) ∧ ω_{co,0}` for
/// given values `χ′(𝐬)`, `χ″(𝐬)`, expanded from coordinate derivatives.
pub fn phi_form_with(n: f64, chi1: f64, chi2: f64, p: &ResolvedPoint) -> Result<FrameForm> {
    let r2 = p.r2();
    let grad = p.to_frame_10(&r2_gradient_coords(p));
    let levi = p.to_frame_11(&r2_levi_coords(p));
    let w0 = FrameForm::from_matrix_11(&cone_matrix(r2, &grad, &levi));
    let dd = FrameForm::from_matrix_11(&outer(&grad, &grad));
    let k = 2.0 / 3.0 * n.powf(4.0 / 3.0) * r2.powf(-2.0 / 3.0) * chi2;
    Ok(w0.wedge(&w0)? * chi1 + dd.wedge(&w0)? * k)
}

/// The glued form `Φ` built from the cutoff `χ` of [`ChiSpec`].
pub fn phi_form(chi: &ChiSpec, p: &ResolvedPoint) -> Result<FrameForm> {
    let s = p.s_param(chi.n as f64);
    phi_form_with(chi.n as f64, chi.eval(s, 1), chi.eval(s, 2), p)
}

/// `n^{2/3}Φ` at `z = 0`:
/// `(2/3)(2χ′+𝐬χ″)𝐬^{1/2}λ_{11̄}∧λ_{22̄} + 2χ′𝐬^{1/2}λ_{11̄}∧λ_{33̄}
///  + (2/3)(2χ′+𝐬χ″)𝐬^{1/2}𝐫⁻²λ_{22̄}∧λ_{33̄}`.
pub fn phi_z0_display(n: f64, chi1: f64, chi2: f64, r2: f64) -> Lambda22 {
    let s = (n * n * r2).powf(2.0 / 3.0);
    let law = 2.0 * chi1 + s * chi2;
    let rs = s.sqrt();
    let diag = [2.0 / 3.0 * law * rs / r2, 2.0 * chi1 * rs, 2.0 / 3.0 * law * rs];
    Lambda22::new(CMatrix3::from_diagonal(&nalgebra::Vector3::from(diag.map(re))))
}

/// `n^{2/3}Φ` on the inner annulus, where `χ` is the identity.
pub fn phi_annulus_display(n: f64, p: &ResolvedPoint) -> Lambda22 {
    let t = p.t_param(n);
    let g = p.gamma();
    let z = p.z;
    let z2 = z.norm_sqr();
    let k = 4.0 / 3.0 * t.powf(-1.0 / 6.0) * n * g;
    Lambda22::new(CMatrix3::new(
        re(4.0 / 3.0 * t.powf(-2.0 / 3.0) * g.powi(4) * n * n),
        z * k,
        ZERO,
        z.conj() * k,
        re(2.0 * t.cbrt() * (1.0 - z2 / (3.0 * g * g))),
        ZERO,
        ZERO,
        ZERO,
        re(4.0 / 3.0 * t.cbrt() * (1.0 - z2 / (g * g))),
    ))
}

struct Annulus {
    grad: [Complex64; 3],
    levi: CMatrix3,
    sigma: f64,
    sigma1: f64,
    sigma2: f64,
    n2: f64,
}

impl Annulus {
    fn new(n: u32, sigma: &SmoothStep, p: &ResolvedPoint) -> Result<Self> {
        check_annulus(n, p)?;
        let nf = n as f64;
        let t = p.t_param(nf);
        Ok(Self {
            grad: p.to_frame_10(&r2_gradient_coords(p)),
            levi: p.to_frame_11(&r2_levi_coords(p)),
            sigma: sigma.eval(t, 0),
            sigma1: sigma.eval(t, 1),
            sigma2: sigma.eval(t, 2),
            n2: nf * nf,
        })
    }

    /// `−(f i∂∂̄σ(𝐭) + i∂σ(𝐭) ∧ ∂̄f + i∂f ∧ ∂̄σ(𝐭))` for `f` with value `f0`, frame gradient `df`.
    fn cutoff_bracket(&self, f0: f64, df: &[Complex64; 3]) -> CMatrix3 {
        let ds = self.grad.map(|c| c * (self.n2 * self.sigma1));
        let dds =
            self.levi * re(self.n2 * self.sigma1) + outer(&self.grad, &self.grad) * re(self.n2 * self.n2 * self.sigma2);
        -(dds * re(f0) + outer(&ds, df) + outer(df, &ds))
    }
}

/// Direct expansion of `−i(h₁∂∂̄σ(𝐭) + ∂σ(𝐭)∧∂̄h₁ + ∂h₁∧∂̄σ(𝐭)) ∧ i∂∂̄h₁` as a `Λ`-matrix.
pub fn h1_term_expansion(s: &ScenarioH, n: u32, sigma: &SmoothStep, p: &ResolvedPoint) -> Result<Lambda22> {
    let ctx = Annulus::new(n, sigma, p)?;
    let h1 = s.h1_polynomial();
    let dh = p.to_frame_10(&h1.gradient(p));
    let x = ctx.cutoff_bracket(h1.eval(p).re, &dh);
    let y = p.to_frame_11(&h1.levi(p));
    FrameForm::from_matrix_11(&x).wedge(&FrameForm::from_matrix_11(&y))?.to_lambda22()
}

fn curve_metric_coords(s: &ScenarioH, p: &ResolvedPoint) -> CMatrix3 {
    let g2 = 1.0 + p.z.norm_sqr();
    let mut m = CMatrix3::zeros();
    m[(0, 0)] = re(s.omega_e_scale / (g2 * g2));
    m
}

/// Direct expansion of the `h₂` term
/// `−i(h₂∂∂̄σ(𝐭) + ∂σ(𝐭)∧∂̄h₂ + ∂h₂∧∂̄σ(𝐭)) ∧ (2ω̃_E + i∂∂̄(2h₁ + h₂))`.
pub fn h2_term(s: &ScenarioH, n: u32, sigma: &SmoothStep, p: &ResolvedPoint) -> Result<Lambda22> {
    let ctx = Annulus::new(n, sigma, p)?;
    let dh2 = p.to_frame_10(&s.h2.gradient(p));
    let x = ctx.cutoff_bracket(s.h2_value(p), &dh2);
    let y = curve_metric_coords(s, p) * re(2.0) + s.h1_polynomial().levi(p) * re(2.0) + s.h2.levi(p);
    let y = p.to_frame_11(&y);
    FrameForm::from_matrix_11(&x).wedge(&FrameForm::from_matrix_11(&y))?.to_lambda22()
}

/// The model ambient Kähler form `ω = ω̃_E + i∂∂̄(h₁ + h₂)` as a frame matrix.
pub fn ambient_metric(s: &ScenarioH, p: &ResolvedPoint) -> CMatrix3 {
    let m = curve_metric_coords(s, p) + s.h1_polynomial().levi(p) + s.h2.levi(p);
    p.to_frame_11(&m)
}

/// `Ω₀ = (1 − σ(𝐭))ω² + (h₁ term) + (h₂ term) + C₀n^{2/3}Φ` on the inner
/// annulus, every piece expanded directly.
pub fn omega0_annulus(
    s: &ScenarioH,
    c0: f64,
    chi: &ChiSpec,
    sigma: &SmoothStep,
    p: &ResolvedPoint,
) -> Result<Lambda22> {
    let n = chi.n;
    let ctx = Annulus::new(n, sigma, p)?;
    let w = FrameForm::from_matrix_11(&ambient_metric(s, p));
    let total = w.wedge(&w)? * (1.0 - ctx.sigma)
        + h1_term_expansion(s, n, sigma, p)?.to_form()
        + h2_term(s, n, sigma, p)?.to_form()
        + phi_form(chi, p)? * (c0 * (n as f64).powf(2.0 / 3.0));
    total.to_lambda22()
}

/// The matrix `[e_{ij}]` bounding `Ω₀` from below on the inner annulus.
pub fn e_matrix(
    s: &ScenarioH,
    c0: f64,
    n: u32,
    sigma: &SmoothStep,
    p: &ResolvedPoint,
    c3_hat: f64,
) -> Result<Lambda22> {
    let block = alpha_matrix(s, n, sigma, p)?;
    Ok(assemble_e(&block.alpha, c0, n as f64, p, c3_hat))
}

fn assemble_e(alpha: &CMatrix3, c0: f64, n: f64, p: &ResolvedPoint, c3: f64) -> Lambda22 {
    let t = p.t_param(n);
    let g = p.gamma();
    let g2 = g * g;
    let z = p.z;
    let z2 = z.norm_sqr();
    let k = 4.0 * g / (3.0 * t.powf(1.0 / 6.0)) * c0;
    let e11 = re(4.0 * g2 * g2 * n * n / (3.0 * t.powf(2.0 / 3.0)) * c0 - c3);
    let e12 = (z * k + alpha[(0, 1)]) * n;
    let e21 = (z.conj() * k + alpha[(1, 0)]) * n;
    let e22 = re(2.0 * t.cbrt() * (1.0 - z2 / (3.0 * g2)) * c0 - c3) + alpha[(1, 1)];
    let e33 = re(4.0 / 3.0 * t.cbrt() * (1.0 - z2 / g2) * c0 - c3) + alpha[(2, 2)];
    Lambda22::new(CMatrix3::new(
        e11,
        e12,
        alpha[(0, 2)] * n,
        e21,
        e22,
        alpha[(1, 2)],
        alpha[(2, 0)] * n,
        alpha[(2, 1)],
        e33,
    ))
}

/// Sample of the inner annulus over the chart `|z| ≤ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusGrid {
    pub z_radii: Vec<f64>,
    pub z_angles: usize,
    pub r_steps: usize,
    pub theta_steps: usize,
    pub phase_steps: usize,
}

impl Default for AnnulusGrid {
    fn default() -> Self {
        Self { z_radii: vec![0.0, 0.5, 1.0, 1.5, 2.0], z_angles: 8, r_steps: 21, theta_steps: 4, phase_steps: 3 }
    }
}

impl AnnulusGrid {
    /// The grid with twice the density in every direction.
    pub fn refined(&self) -> Self {
        let mut z_radii = Vec::with_capacity(2 * self.z_radii.len());
        for w in self.z_radii.windows(2) {
            z_radii.push(w[0]);
            z_radii.push(0.5 * (w[0] + w[1]));
        }
        z_radii.extend(self.z_radii.last());
        Self {
            z_radii,
            z_angles: 2 * self.z_angles,
            r_steps: 2 * self.r_steps - 1,
            theta_steps: 2 * self.theta_steps - 1,
            phase_steps: 2 * self.phase_steps,
        }
    }

    fn z_points(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for &rad in &self.z_radii {
            if rad == 0.0 {
                out.push(ZERO);
            } else {
                let k = self.z_angles.max(1);
                out.extend((0..k).map(|j| Complex64::from_polar(rad, std::f64::consts::TAU * j as f64 / k as f64)));
            }
        }
        out
    }

    fn spread(steps: usize, lo: f64, hi: f64) -> Vec<f64> {
        match steps {
            0 => vec![],
            1 => vec![lo],
            k => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
        }
    }

    /// Sample points of `1/n ≤ 𝐫 ≤ 2/n`.
    pub fn points(&self, n: u32) -> Result<Vec<ResolvedPoint>> {
        if self.z_radii.iter().any(|&r| !(0.0..=2.0).contains(&r)) {
            return domain("annulus grid radii must lie in the chart |z| ≤ 2");
        }
        let nf = n as f64;
        let radii = Self::spread(self.r_steps, 1.0 / nf, 2.0 / nf);
        let thetas = Self::spread(self.theta_steps, 0.0, std::f64::consts::FRAC_PI_2);
        let k = self.phase_steps.max(1);
        let phases: Vec<f64> = (0..k).map(|j| std::f64::consts::TAU * j as f64 / k as f64).collect();
        let mut out = Vec::new();
        for z in self.z_points() {
            for &r in &radii {
                for &th in &thetas {
                    for &pu in &phases {
                        for &pv in &phases {
                            out.push(ResolvedPoint::from_polar(z, r, th, pu, pv)?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Measured bound on the coefficient blocks and the `h₂` term over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C3Measurement {
    pub n: u32,
    pub c_max: f64,
    pub d_max: f64,
    pub alpha_max: f64,
    /// Largest `|Λ|`-coefficient of the `h₂` term.
    pub h2_max: f64,
    /// Largest negative part of the `h₂` term, `max(0, −λ_min)`.
    pub h2_negative: f64,
    pub c3_hat: f64,
}

fn max_abs(m: &CMatrix3) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `Ĉ₃` as the maximum over the grid of `|c_{ij̄}|`, `|d_{ij̄}|`, `|α_{ij̄}|`
/// and the size of the `h₂` term.
pub fn measure_c3(s: &ScenarioH, n: u32, sigma: &SmoothStep, points: &[ResolvedPoint]) -> Result<C3Measurement> {
    let rows: Vec<[f64; 5]> = points
        .par_iter()
        .map(|p| {
            let block = alpha_matrix(s, n, sigma, p)?;
            let h2 = h2_term(s, n, sigma, p)?;
            Ok([
                max_abs(&block.c),
                block.d.iter().map(|c| c.norm()).fold(0.0, f64::max),
                max_abs(&block.alpha),
                h2.max_abs(),
                (-h2.min_eigenvalue()).max(0.0),
            ])
        })
        .collect::<Result<_>>()?;
    let m = |k: usize| rows.iter().map(|r| r[k]).fold(0.0, f64::max);
    let (c_max, d_max, alpha_max, h2_max, h2_negative) = (m(0), m(1), m(2), m(3), m(4));
    let c3_hat = [c_max, d_max, alpha_max, h2_max, h2_negative].into_iter().fold(0.0, f64::max);
    Ok(C3Measurement { n, c_max, d_max, alpha_max, h2_max, h2_negative, c3_hat })
}

/// Measured constant `Ĉ₂` in `n^{2/3}Φ ≥ −Ĉ₂n⁻¹Σ_{k≠j}λ_{kk̄}∧λ_{jj̄}` outside `U(2/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2Measurement {
    pub n: u32,
    pub c2_hat: f64,
    /// `𝐬` at which the bound is attained.
    pub worst_s: f64,
    pub samples: usize,
}

/// `𝐬`-grid over `z = 0`: half log spaced on `[c₁, c₃)`, half linear on the gluing patch `[c₃, c₄)`.
fn outer_points(chi: &ChiSpec, samples: usize) -> Result<Vec<(f64, ResolvedPoint)>> {
    let nf = chi.n as f64;
    let patch = samples / 2;
    let (lo, hi) = (chi.c1.ln(), chi.c3.ln());
    let outer = (0..samples - patch).map(|i| (lo + (hi - lo) * i as f64 / (samples - patch) as f64).exp());
    let inner = (0..patch).map(|i| chi.c3 + (chi.c4 - chi.c3) * i as f64 / patch as f64);
    outer
        .chain(inner)
        .map(|s| {
            let r = s.powf(0.75) / nf;
            Ok((s, ResolvedPoint::from_polar(ZERO, r, 0.3, 0.0, 0.0)?))
        })
        .collect()
}

pub fn measure_c2(chi: &ChiSpec, samples: usize) -> Result<C2Measurement> {
    if samples < 2 {
        return domain("Ĉ₂ needs at least two samples");
    }
    let nf = chi.n as f64;
    let scale = nf.powf(2.0 / 3.0);
    let pts = outer_points(chi, samples)?;
    let worst = pts
        .par_iter()
        .map(|(s, p)| {
            let e = (phi_form(chi, p)? * scale).to_lambda22()?;
            Ok((-e.min_eigenvalue() * nf / 2.0, *s))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, chi.c1), |a, b| if b.0 > a.0 { b } else { a });
    Ok(C2Measurement { n: chi.n, c2_hat: worst.0, worst_s: worst.1, samples })
}

/// Result of the outer check `κ·Σ_{k≠j}λ_{kk̄}∧λ_{jj̄} − 3C₀Ĉ₂n⁻¹ω_co² > 0` on `U(1) ∖ U(2/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterCheck {
    pub n: u32,
    pub c0: f64,
    pub c2_hat: f64,
    pub kappa: f64,
    pub min_eigenvalue: f64,
    pub passes: bool,
}

pub fn outer_check(chi: &ChiSpec, c0: f64, c2_hat: f64, kappa: f64, samples: usize) -> Result<OuterCheck> {
    let nf = chi.n as f64;
    let k = 3.0 * c0 * c2_hat / nf;
    let pts = outer_points(chi, samples)?;
    let min_eigenvalue = pts
        .par_iter()
        .map(|(_, p)| {
            let w = base_forms(p)?.omega_co;
            let e = w.wedge(&w)?.to_lambda22()?.e;
            let m = Lambda22::new(CMatrix3::identity() * re(2.0 * kappa) - e * re(k));
            Ok(m.min_eigenvalue())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(OuterCheck { n: chi.n, c0, c2_hat, kappa, min_eigenvalue, passes: min_eigenvalue > 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Scale of the model ambient form `ω² = κ Σ_{k≠j}λ_{kk̄}∧λ_{jj̄}` in the outer check.
    pub kappa: f64,
    pub c0_max: f64,
    pub rel_tol: f64,
    pub c2_samples: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { kappa: 1.0, c0_max: 1e6, rel_tol: 1e-6, c2_samples: 4001 }
    }
}

/// Positivity of the `e` matrix: all leading minors of `[e_ij]` positive, and
/// the form itself positive.
pub fn e_positive(e: &Lambda22) -> bool {
    sylvester(&e.e).0 == PositivityClass::Positive && sylvester(&e.positivity_matrix()).0 == PositivityClass::Positive
}

struct PreparedAnnulus {
    points: Vec<(ResolvedPoint, CMatrix3)>,
    c3: C3Measurement,
    n: u32,
}

impl PreparedAnnulus {
    fn new(s: &ScenarioH, n: u32, sigma: &SmoothStep, grid: &AnnulusGrid) -> Result<Self> {
        let pts = grid.points(n)?;
        let c3 = measure_c3(s, n, sigma, &pts)?;
        let points = pts.par_iter().map(|p| Ok((*p, alpha_matrix(s, n, sigma, p)?.alpha))).collect::<Result<_>>()?;
        Ok(Self { points, c3, n })
    }

    fn e_at(&self, k: usize, c0: f64) -> Lambda22 {
        let (p, alpha) = &self.points[k];
        assemble_e(alpha, c0, self.n as f64, p, self.c3.c3_hat)
    }

    fn feasible(&self, c0: f64) -> bool {
        (0..self.points.len()).into_par_iter().all(|k| e_positive(&self.e_at(k, c0)))
    }

    /// Smallest leading minors of the raw and sign-corrected `e` over the grid.
    fn min_minors(&self, c0: f64) -> ([f64; 3], [f64; 3]) {
        let mut raw = [f64::INFINITY; 3];
        let mut intrinsic = [f64::INFINITY; 3];
        for k in 0..self.points.len() {
            let e = self.e_at(k, c0);
            for (slot, m) in raw.iter_mut().zip(e.leading_minors()) {
                *slot = slot.min(m);
            }
            for (slot, m) in intrinsic.iter_mut().zip(crate::frame::leading_minors(&e.positivity_matrix())) {
                *slot = slot.min(m);
            }
        }
        (raw, intrinsic)
    }
}

fn bisect_c0(feasible: impl Fn(f64) -> bool, opts: &SearchOptions) -> Result<f64> {
    let mut hi = 1.0_f64.min(opts.c0_max);
    let mut lo = 0.0;
    while !feasible(hi) {
        if hi >= opts.c0_max {
            return Err(Error::Search(format!("no C₀ ≤ {} makes the e matrix positive", opts.c0_max)));
        }
        lo = hi;
        hi = (2.0 * hi).min(opts.c0_max);
    }
    while hi - lo > (opts.rel_tol * hi).max(1e-12) {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Search result for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub n: u32,
    pub grid_points: usize,
    pub c3: C3Measurement,
    pub c0_star: f64,
    /// Smallest leading minors of `[e_ij]` over the grid at `C₀*`.
    pub min_minors: [f64; 3],
    /// Smallest leading minors of the sign-corrected positivity matrix at `C₀*`.
    pub min_intrinsic_minors: [f64; 3],
    /// Smallest eigenvalue over the grid of the fully expanded `Ω₀` at `C₀*`.
    pub omega0_min_eigenvalue: f64,
    pub c2: C2Measurement,
    pub outer: OuterCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivitySearch {
    pub rows: Vec<SearchRow>,
    /// Largest `C₀*(n)` over the sweep.
    pub c0_star: f64,
    pub c0_nonincreasing: bool,
    /// Smallest `n` from the candidate list for which both the annulus and
    /// the outer checks pass at `c0_star`.
    pub n_of_c0: Option<u32>,
}

fn search_row(s: &ScenarioH, n: u32, grid: &AnnulusGrid, opts: &SearchOptions) -> Result<SearchRow> {
    let sigma = SmoothStep::sigma();
    let chi = ChiSpec::new(n)?;
    let prep = PreparedAnnulus::new(s, n, &sigma, grid)?;
    let c0_star = bisect_c0(|c0| prep.feasible(c0), opts)?;
    let (min_minors, min_intrinsic_minors) = prep.min_minors(c0_star);
    let omega0_min_eigenvalue = prep
        .points
        .par_iter()
        .map(|(p, _)| Ok(omega0_annulus(s, c0_star, &chi, &sigma, p)?.min_eigenvalue()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let c2 = measure_c2(&chi, opts.c2_samples)?;
    let outer = outer_check(&chi, c0_star, c2.c2_hat, opts.kappa, opts.c2_samples)?;
    Ok(SearchRow {
        n,
        grid_points: prep.points.len(),
        c3: prep.c3,
        c0_star,
        min_minors,
        min_intrinsic_minors,
        omega0_min_eigenvalue,
        c2,
        outer,
    })
}

/// Whether both the annulus `e`-matrix test and the outer check pass at `(C₀, n)`.
pub fn positive_at(s: &ScenarioH, c0: f64, n: u32, grid: &AnnulusGrid, opts: &SearchOptions) -> Result<bool> {
    let sigma = SmoothStep::sigma();
    let prep = PreparedAnnulus::new(s, n, &sigma, grid)?;
    if !prep.feasible(c0) {
        return Ok(false);
    }
    let chi = ChiSpec::new(n)?;
    let c2 = measure_c2(&chi, opts.c2_samples)?;
    Ok(outer_check(&chi, c0, c2.c2_hat, opts.kappa, opts.c2_samples)?.passes)
}

/// Default candidates for `n(C₀)`: powers of two from 4 to 65536.
pub fn default_n_candidates() -> Vec<u32> {
    (2..=16).map(|k| 1u32 << k).collect()
}

/// Bisection for the smallest admissible `C₀` at every `n`, followed by the
/// search for `n(C₀*)` over `n_candidates`.
pub fn positivity_search(
    s: &ScenarioH,
    n_list: &[u32],
    n_candidates: &[u32],
    grid: &AnnulusGrid,
    opts: &SearchOptions,
) -> Result<PositivitySearch> {
    s.validate()?;
    if n_list.is_empty() {
        return domain("positivity search needs at least one n");
    }
    let rows = n_list.iter().map(|&n| search_row(s, n, grid, opts)).collect::<Result<Vec<_>>>()?;
    let c0_star = rows.iter().map(|r| r.c0_star).fold(0.0, f64::max);
    let c0_nonincreasing = rows.windows(2).all(|w| w[1].c0_star <= w[0].c0_star * (1.0 + 10.0 * opts.rel_tol));
    let mut n_of_c0 = None;
    for &n in n_candidates {
        if positive_at(s, c0_star, n, grid, opts)? {
            n_of_c0 = Some(n);
            break;
        }
    }
    Ok(PositivitySearch { rows, c0_star, c0_nonincreasing, n_of_c0 })
}

/// `Λ`-matrix of `Σ_{k≠j} λ_{kk̄}∧λ_{jj̄}`.
pub fn off_diagonal_pairs() -> Lambda22 {
    Lambda22::new(CMatrix3::identity() * re(2.0))
}

/// Smallest eigenvalue of the positivity matrix of `ω_co² − (1/3)Σ_{k≠j}λ_{kk̄}∧λ_{jj̄}` at a point.
pub fn omega_co_square_margin(p: &ResolvedPoint) -> Result<f64> {
    let w = base_forms(p)?.omega_co;
    let e = w.wedge(&w)?.to_lambda22()?.e - off_diagonal_pairs().e / re(3.0);
    Ok(min_eigenvalue(&Lambda22::new(e).positivity_matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_point(n: u32, frac: f64) -> ResolvedPoint {
        ResolvedPoint::from_polar(c(0.7, -0.4), frac / n as f64, 0.6, 0.3, 1.9).unwrap()
    }

    #[test]
    fn point_validation() {
        assert!(ResolvedPoint::new(ZERO, ZERO, ZERO).is_err());
        assert!(ResolvedPoint::new(ZERO, c(1.0, 0.0), ZERO).is_err());
        let p = ResolvedPoint::new(c(1.0, 0.0), c(0.3, 0.0), c(0.0, 0.4)).unwrap();
        assert!((p.r2() - 2.0 * 0.25).abs() < 1e-15);
        assert!((p.gamma() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frame_change_inverts_the_frame() {
        let p = ResolvedPoint::new(c(0.2, 0.1), c(0.3, -0.2), c(-0.1, 0.25)).unwrap();
        let rho = p.rho();
        // λ₂, λ₃ in terms of du, dv, composed with du, dv in terms of λ.
        let lam = CMatrix3::new(ONE, ZERO, ZERO, ZERO, p.u.conj() / rho, p.v.conj() / rho, ZERO, p.v / rho, -p.u / rho);
        let prod = lam * p.frame_change();
        assert!((prod - CMatrix3::identity()).iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn printed_r2_derivatives_match_coordinates() {
        let p = ResolvedPoint::new(c(0.6, -1.1), c(0.05, 0.02), c(-0.03, 0.04)).unwrap();
        let g = p.to_frame_10(&r2_gradient_coords(&p));
        let l = p.to_frame_11(&r2_levi_coords(&p));
        let gp = r2_gradient_frame(&p);
        for k in 0..3 {
            assert!((g[k] - gp[k]).norm() < 1e-15);
        }
        assert!((l - r2_levi_frame(&p)).iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn z0_displays() {
        let p = ResolvedPoint::new(ZERO, c(0.3, 0.1), c(-0.2, 0.4)).unwrap();
        let r2 = p.r2();
        let f = base_forms(&p).unwrap();
        let ddbar = f.ddbar_r2.to_matrix_11().unwrap();
        let want = CMatrix3::from_diagonal(&nalgebra::Vector3::new(re(r2), ONE, ONE));
        assert!((ddbar - want).iter().all(|v| v.norm() < 1e-15));
        let w = f.dr2_wedge.to_matrix_11().unwrap();
        assert!((w[(1, 1)].re - r2).abs() < 1e-15);
        assert!(w.iter().enumerate().all(|(k, v)| k == 4 || v.norm() < 1e-15));
        let co0 = f.omega_co0.to_matrix_11().unwrap();
        let co = f.omega_co.to_matrix_11().unwrap();
        let d0 = omega_co0_z0_display(r2);
        let d1 = omega_co_z0_display(r2).unwrap();
        for k in 0..3 {
            assert!((co0[(k, k)].re - d0[k]).abs() < 1e-14 * d0[k].abs());
            assert!((co[(k, k)].re - d1[k]).abs() < 1e-12 * d1[k].abs());
        }
    }

    #[test]
    fn smooth_metric_square_dominates_a_third_of_the_pair_sum() {
        for k in 1..60 {
            let r = k as f64 / 60.0;
            let p = ResolvedPoint::from_polar(ZERO, r, 0.4, 0.0, 1.0).unwrap();
            assert!(omega_co_square_margin(&p).unwrap() >= 0.0, "r = {r}");
        }
    }

    #[test]
    fn phi_z0_display_matches_expansion() {
        let n = 50;
        let chi = ChiSpec::new(n).unwrap();
        for s in [1.5, 3.0, 10.0, 100.0, 0.5 * (chi.c3 + chi.c4), 0.99 * chi.c4] {
            let r = s.powf(0.75) / n as f64;
            let p = ResolvedPoint::from_polar(ZERO, r, 0.8, 0.1, 2.0).unwrap();
            let direct = (phi_form(&chi, &p).unwrap() * (n as f64).powf(2.0 / 3.0)).to_lambda22().unwrap();
            let printed = phi_z0_display(n as f64, chi.eval(s, 1), chi.eval(s, 2), p.r2());
            let scale = printed.max_abs().max(1e-300);
            assert!((direct.e - printed.e).iter().all(|v| v.norm() < 1e-12 * scale), "s = {s}");
        }
    }

    #[test]
    fn phi_annulus_display_matches_cone_square() {
        let n = 90;
        for frac in [1.0, 1.3, 1.9] {
            let p = sample_point(n, frac);
            let direct =
                (phi_form_with(n as f64, 1.0, 0.0, &p).unwrap() * (n as f64).powf(2.0 / 3.0)).to_lambda22().unwrap();
            let printed = phi_annulus_display(n as f64, &p);
            assert!((direct.e - printed.e).iter().all(|v| v.norm() < 1e-11 * printed.max_abs()));
        }
    }

    #[test]
    fn trivial_scenario_has_no_corrections() {
        let s = ScenarioH::trivial();
        let n = 40;
        let p = sample_point(n, 1.4);
        let block = alpha_matrix(&s, n, &SmoothStep::sigma(), &p).unwrap();
        assert!(max_abs(&block.c) == 0.0 && max_abs(&block.alpha) == 0.0);
        assert!(block.d.iter().all(|v| *v == ZERO));
        assert_eq!(h1_term_expansion(&s, n, &SmoothStep::sigma(), &p).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn unit_coefficient_substitution() {
        let s = ScenarioH {
            a: ZPoly::new(vec![ZTerm { coeff: ONE, z_pow: 0, zbar_pow: 0 }]),
            b: ZPoly::default(),
            h2: Polynomial::default(),
            omega_e_scale: 1.0,
        };
        let p = ResolvedPoint::new(ZERO, c(0.1, 0.0), ZERO).unwrap();
        assert!((coefficients_cd(&s, &p).d[1] - ONE).norm() < 1e-15);
    }

    #[test]
    fn alpha_vanishes_where_sigma_is_flat() {
        let s = ScenarioH::default();
        let n = 30;
        let p = sample_point(n, 1.6);
        let block = alpha_matrix(&s, n, &SmoothStep::new(0.25, 0.5).unwrap(), &p).unwrap();
        assert_eq!(max_abs(&block.alpha), 0.0);
    }

    #[test]
    fn alpha_block_matches_direct_expansion() {
        let sigma = SmoothStep::sigma();
        for (k, s) in [ScenarioH::default(), ScenarioH::random(3), ScenarioH::random(11)].iter().enumerate() {
            let n = 60 + 17 * k as u32;
            for frac in [1.05, 1.5, 1.93] {
                let p = sample_point(n, frac);
                let rhs = alpha_rhs(&alpha_matrix(s, n, &sigma, &p).unwrap(), n);
                let lhs = h1_term_expansion(s, n, &sigma, &p).unwrap();
                assert!(lhs.is_hermitian(1e-13));
                let scale = lhs.max_abs();
                assert!((lhs.e - rhs.e).iter().all(|v| v.norm() < 1e-12 * scale), "{:?}\n{:?}", lhs.e, rhs.e);
            }
        }
    }

    #[test]
    fn e_matrix_conjugate_pairs_and_limits() {
        let s = ScenarioH::default();
        let n = 100;
        let sigma = SmoothStep::sigma();
        let p = sample_point(n, 1.4);
        let e = e_matrix(&s, 5.0, n, &sigma, &p, 0.4).unwrap();
        assert!(e.is_hermitian(1e-14));
        assert!(e_positive(&e_matrix(&s, 1e5, n, &sigma, &p, 0.4).unwrap()));
        let zero = e_matrix(&s, 0.0, n, &sigma, &p, 0.4).unwrap();
        assert!(zero.e[(0, 0)].re < 0.0);
        assert_eq!(e.classify().unwrap().class == PositivityClass::Positive, e_positive(&e));
        assert!(e_matrix(&s, 1.0, n, &sigma, &sample_point(n, 2.5), 0.4).is_err());
    }

    #[test]
    fn random_scenarios_validate() {
        for seed in 0..20 {
            ScenarioH::random(seed).validate().unwrap();
        }
        ScenarioH::default().validate().unwrap();
        let mut bad = ScenarioH { h2: Polynomial::monomial(ONE, [0, 0, 1, 0, 0, 0]), ..Default::default() };
        assert!(bad.validate().is_err());
        bad.h2 = Polynomial::monomial(c(0.0, 1.0), [0, 0, 1, 1, 0, 0]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn grid_refinement_doubles_density() {
        let g = AnnulusGrid::default();
        let f = g.refined();
        assert_eq!(f.z_radii.len(), 2 * g.z_radii.len() - 1);
        assert_eq!(g.points(50).unwrap().len(), 33 * g.r_steps * g.theta_steps * g.phase_steps.pow(2));
        for p in f.points(50).unwrap().iter().step_by(97) {
            let nr = 50.0 * p.r();
            assert!((1.0 - 1e-12..=2.0 + 1e-12).contains(&nr));
        }
    }

    #[test]
    fn bisection_finds_threshold() {
        let opts = SearchOptions::default();
        let c = bisect_c0(|x| x > 37.25, &opts).unwrap();
        assert!((c - 37.25).abs() < 1e-4);
        assert!(matches!(bisect_c0(|_| false, &opts), Err(Error::Search(_))));
    }
}
