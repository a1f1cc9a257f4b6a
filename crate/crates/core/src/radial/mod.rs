//! Radial Kähler potentials of the conifold metrics.
//!
//! All three geometries carry a Kähler potential `f(s)` of the radial variable
//! `s = r²`, with `f′(s) = η(s) / s`:
//!
//! * the cone, `η = s^{2/3}` and `f = (3/2) s^{2/3}`;
//! * the resolved conifold, `η² (η + 3/2) = s²`;
//! * the deformed conifold with parameter `t > 0`,
//!   `η = 2^{−1/3} t^{2/3} (sinh 2τ − 2τ)^{1/3} / tanh τ` with `s = t cosh τ`,
//!   the solution of `s (s² − t²) (η³)′ + 3 t² η³ = 2 s⁴` that is regular at `s = t`.
//!
//! Derivatives up to `f⁗` are propagated exactly with Taylor jets and
//! cross-checked against finite differences before being returned.

mod studies;
pub mod tau;

pub use studies::{
    asymptotic_constants, convergence_table, monotonicity_witness, ratio_bounds, AsymptoticConstants, ConvergenceRow,
    ConvergenceTable, MonotoneWitness, RatioReport,
};

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::numerics::quad::{self, QuadOptions};
use crate::numerics::roots::{newton_bracketed, NewtonOptions};
use crate::numerics::{fd, Jet};
use crate::{Error, Result};

/// Taylor jet carrying derivatives of order 0 through 4.
pub type Jet5 = Jet<5>;

/// Relative distance from the tip `s = t` below which deformed profiles refuse to evaluate.
pub const SINGULAR_GUARD: f64 = 1e-12;

const FD_REL_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-6;
const SERIES_MAX_X: f64 = 0.25;
const SERIES_TERMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Cone,
    Resolved,
    Deformed { t: f64 },
}

impl ProfileKind {
    pub fn deformed(t: f64) -> Result<Self> {
        if t > 0.0 && t.is_finite() {
            Ok(Self::Deformed { t })
        } else {
            domain(format!("deformation parameter must be positive, got {t}"))
        }
    }

    /// The deformation parameter, zero for the cone and the resolved conifold.
    pub fn t(&self) -> f64 {
        match self {
            Self::Deformed { t } => *t,
            _ => 0.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Cone => "cone",
            Self::Resolved => "resolved",
            Self::Deformed { .. } => "deformed",
        }
    }

    fn check(&self, s: f64) -> Result<()> {
        if !(s > 0.0 && s.is_finite()) {
            return domain(format!("radial variable must be positive, got {s}"));
        }
        if let Self::Deformed { t } = self {
            if s <= t * (1.0 + SINGULAR_GUARD) {
                return domain(format!("r² = {s} is not above the tip t = {t}"));
            }
        }
        Ok(())
    }
}

/// A point on the deformed conifold's radial axis in its three common parametrizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSample {
    pub r2: f64,
    pub tau: f64,
    pub eps: f64,
}

impl RadialSample {
    pub fn new(t: f64, r2: f64) -> Result<Self> {
        ProfileKind::deformed(t)?.check(r2)?;
        Ok(Self { r2, tau: tau::acosh_1p((r2 - t) / t), eps: t / r2 })
    }
}

/// Potential, derivatives and Ricci-flatness residual of a profile at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEval {
    pub kind: ProfileKind,
    pub r2: f64,
    pub eta: f64,
    pub eta_prime: f64,
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    pub ode_residual: f64,
}

/// `η(s)`.
pub fn eta(kind: ProfileKind, s: f64) -> Result<f64> {
    kind.check(s)?;
    match kind {
        ProfileKind::Cone => Ok((s * s).cbrt()),
        ProfileKind::Resolved => resolved_eta(s),
        ProfileKind::Deformed { t } => Ok(deformed_eta(t, s)),
    }
}

fn deformed_eta(t: f64, s: f64) -> f64 {
    let tau = tau::acosh_1p((s - t) / t);
    (0.5 * t * t * tau::sinh_excess(tau)).cbrt() * tau::tau_coth(tau)
}

fn resolved_eta(s: f64) -> Result<f64> {
    let s2 = s * s;
    let x0 = s2.cbrt();
    let g = |e: f64| (e * e * (e + 1.5) - s2, 3.0 * e * (e + 1.0));
    let e = newton_bracketed(g, x0, 0.0, x0 + 2.0, NewtonOptions::default())
        .map_err(|e| Error::Convergence(format!("resolved η at r² = {s}: {e}")))?;
    let (v, d) = g(e);
    Ok(e - v / d)
}

/// The potential `f(s)`.
///
/// The deformed potential vanishes at the tip, the resolved potential is
/// normalized by `f(1) = 0`, and the cone uses `f = (3/2) s^{2/3}`.
pub fn f_value(kind: ProfileKind, s: f64) -> Result<f64> {
    match kind {
        ProfileKind::Cone => {
            kind.check(s)?;
            Ok(1.5 * (s * s).cbrt())
        }
        ProfileKind::Resolved => {
            kind.check(s)?;
            let integrand = |x: f64| resolved_eta(x).map(|e| e / x).unwrap_or(f64::NAN);
            Ok(quad::integrate(integrand, 1.0, s, QuadOptions::default())?.value)
        }
        ProfileKind::Deformed { t } => {
            if !(s >= t && s.is_finite()) {
                return domain(format!("r² = {s} is below the tip t = {t}"));
            }
            let upper = tau::acosh_1p((s - t) / t);
            let integrand = |x: f64| x * tau::sinh_excess(x).cbrt();
            let r = quad::integrate(integrand, 0.0, upper, QuadOptions::default())?;
            Ok((0.5 * t * t).cbrt() * r.value)
        }
    }
}

/// Taylor jet of `η` at `s`.
pub fn eta_jet(kind: ProfileKind, s: f64) -> Result<Jet5> {
    kind.check(s)?;
    eta_jet_unguarded(kind, s)
}

/// Taylor jet of `f′ = η / s` at `s`; its coefficient `k` is `f^{(k+1)}(s) / k!`.
pub fn f_prime_jet(kind: ProfileKind, s: f64) -> Result<Jet5> {
    kind.check(s)?;
    f_prime_jet_unguarded(kind, s)
}

fn f_prime_jet_unguarded(kind: ProfileKind, s: f64) -> Result<Jet5> {
    match kind {
        ProfileKind::Cone => {
            let mut c = *Jet5::variable(s).powf(-1.0 / 3.0).coeffs();
            c[0] = 1.0 / s.cbrt();
            Ok(Jet5::from_coeffs(c))
        }
        // η / s = (η + 3/2)^{−1/2} avoids dividing two quantities that vanish at s = 0.
        ProfileKind::Resolved => Ok((eta_jet_unguarded(kind, s)? + 1.5).powf(-0.5)),
        ProfileKind::Deformed { .. } => Ok(eta_jet_unguarded(kind, s)? / Jet5::variable(s)),
    }
}

fn eta_jet_unguarded(kind: ProfileKind, s: f64) -> Result<Jet5> {
    match kind {
        ProfileKind::Cone => {
            let mut j = Jet5::variable(s).powf(2.0 / 3.0);
            let mut c = *j.coeffs();
            c[0] = (s * s).cbrt();
            j = Jet5::from_coeffs(c);
            Ok(j)
        }
        ProfileKind::Resolved => {
            // Invert s(η) = η (η + 3/2)^{1/2} as a power series around η(s).
            let e0 = resolved_eta(s)?;
            let ej = Jet5::variable(e0);
            let b = *(ej * (ej + 1.5).sqrt()).coeffs();
            let delta = Jet5::variable(0.0);
            let mut eps = Jet5::constant(0.0);
            for _ in 0..4 {
                let mut higher = Jet5::constant(0.0);
                for &bk in b[2..].iter().rev() {
                    higher = (higher + bk) * eps;
                }
                eps = (delta - higher * eps) / b[1];
            }
            Ok(eps + e0)
        }
        ProfileKind::Deformed { t } => Ok(deformed_eta_jet(t, s)),
    }
}

fn tip_series() -> &'static [f64; SERIES_TERMS] {
    static COEFFS: OnceLock<[f64; SERIES_TERMS]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        // Y(x) = η³/t² at s = t(1 + x) solves x(1+x)(2+x) Y′ + 3Y = 2(1+x)⁴.
        let binom4 = [1.0, 4.0, 6.0, 4.0, 1.0];
        let mut a = [0.0; SERIES_TERMS];
        for m in 0..SERIES_TERMS {
            let rhs = if m < 5 { 2.0 * binom4[m] } else { 0.0 };
            let prev1 = if m >= 1 { 3.0 * (m as f64 - 1.0) * a[m - 1] } else { 0.0 };
            let prev2 = if m >= 2 { (m as f64 - 2.0) * a[m - 2] } else { 0.0 };
            a[m] = (rhs - prev1 - prev2) / (2.0 * m as f64 + 3.0);
        }
        a
    })
}

fn deformed_eta_jet(t: f64, s: f64) -> Jet5 {
    let x = (s - t) / t;
    if x <= SERIES_MAX_X {
        let a = tip_series();
        let xj = Jet5::variable(x);
        let mut y = Jet5::constant(a[SERIES_TERMS - 1]);
        for &am in a.iter().rev().skip(1) {
            y = y * xj + am;
        }
        y.cbrt().scale(t.powf(2.0 / 3.0)).rescale(1.0 / t)
    } else {
        let sj = Jet5::variable(s);
        let tau0 = tau::acosh_1p(x);
        let dtau = ((sj - t) * (sj + t)).powf(-0.5);
        let tj = dtau.integral(tau0);
        let (sh2, _) = (tj * 2.0).sinh_cosh();
        let (sh, ch) = tj.sinh_cosh();
        let core = (sh2 - tj * 2.0).scale(0.5 * t * t).cbrt();
        core * ch / sh
    }
}

/// Relative residual of the equation defining `η` for the given geometry.
///
/// For the cone and the deformed conifold this is the Ricci-flatness ODE
/// `s (s² − t²) (η³)′ + 3 t² η³ = 2 s⁴` normalized by `2 s⁴`, with `(η³)′`
/// from the closed form `η³ = s² h(τ)`. For the resolved conifold it is the
/// algebraic relation `η² (η + 3/2) = s²` normalized by `s²`.
pub fn ode_residual(kind: ProfileKind, s: f64) -> Result<f64> {
    kind.check(s)?;
    match kind {
        ProfileKind::Cone => {
            let de3 = 2.0 * s;
            Ok((s.powi(3) * de3 - 2.0 * s.powi(4)).abs() / (2.0 * s.powi(4)))
        }
        ProfileKind::Resolved => {
            let e = resolved_eta(s)?;
            Ok((e * e * (e + 1.5) - s * s).abs() / (s * s))
        }
        ProfileKind::Deformed { t } => {
            let tau = tau::acosh_1p((s - t) / t);
            let hv = tau::h(tau);
            let e3 = s * s * hv;
            let de3 = 2.0 * s * hv + s * s * tau::h1_over_sinh5(tau) / (2.0 * t);
            let lhs = s * (s - t) * (s + t) * de3 + 3.0 * t * t * e3;
            Ok((lhs - 2.0 * s.powi(4)).abs() / (2.0 * s.powi(4)))
        }
    }
}

/// `g_u(s)` with `f′_u(s) = s^{−1/3} g_u(s)` for the deformed profile of parameter `u`.
pub fn g_u(u: f64, s: f64) -> f64 {
    let q = (u / s) * (u / s);
    let root = (1.0 - q).sqrt();
    (root - q * (s / u).acosh()).cbrt() / root
}

/// All derivatives of the potential at `s`, each verified against a
/// Richardson-extrapolated central difference of the next-lower one.
pub fn derivatives(kind: ProfileKind, s: f64) -> Result<ProfileEval> {
    let ej = eta_jet(kind, s)?;
    let closed = eta(kind, s)?;
    if (ej.value() - closed).abs() > 1e-12 * closed {
        return Err(Error::Verification(format!(
            "η jet {} disagrees with closed form {closed} at r² = {s}",
            ej.value()
        )));
    }
    let fp = f_prime_jet_unguarded(kind, s)?;
    let fv = f_value(kind, s)?;
    let d = [fp.derivative(0), fp.derivative(1), fp.derivative(2), fp.derivative(3)];

    let h = FD_REL_STEP * s;
    let h0 = match kind {
        ProfileKind::Deformed { t } => h.min(0.5 * (s - t)),
        _ => h,
    };
    let f_fd = fd::derivative(|x| f_value(kind, x).unwrap_or(f64::NAN), s, h0);
    verify_step(0, d[0], f_fd, fv / s, s)?;
    for k in 1..4 {
        let lower = |x: f64| f_prime_jet_unguarded(kind, x).map(|j| j.derivative(k - 1)).unwrap_or(f64::NAN);
        let num = fd::derivative(lower, s, h);
        verify_step(k, d[k], num, d[k - 1] / s, s)?;
    }

    Ok(ProfileEval {
        kind,
        r2: s,
        eta: closed,
        eta_prime: ej.derivative(1),
        f: fv,
        f1: d[0],
        f2: d[1],
        f3: d[2],
        f4: d[3],
        ode_residual: ode_residual(kind, s)?,
    })
}

fn verify_step(k: usize, analytic: f64, numeric: f64, lower_scale: f64, s: f64) -> Result<()> {
    let scale = analytic.abs().max(lower_scale.abs());
    let err = (analytic - numeric).abs();
    if !(err <= FD_REL_TOL * scale) {
        return Err(Error::Verification(format!(
            "derivative of order {} at r² = {s}: analytic {analytic:e}, finite difference {numeric:e}",
            k + 1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn cone_reference_values() {
        assert_eq!(eta(ProfileKind::Cone, 8.0).unwrap(), 4.0);
        assert_eq!(f_value(ProfileKind::Cone, 1.0).unwrap(), 1.5);
        let e = derivatives(ProfileKind::Cone, 1.0).unwrap();
        assert!(rel(e.f1, 1.0) < 1e-15);
        assert!(rel(e.f2, -1.0 / 3.0) < 1e-15);
        assert!(rel(e.f3, 4.0 / 9.0) < 1e-15);
        assert!(rel(e.f4, -28.0 / 27.0) < 1e-14);
        assert!(e.ode_residual < 1e-15);
    }

    #[test]
    fn resolved_reference_value() {
        let e = eta(ProfileKind::Resolved, 2.5f64.sqrt()).unwrap();
        assert!((e - 1.0).abs() < 1e-14);
    }

    #[test]
    fn deformed_domain_guard() {
        let k = ProfileKind::deformed(1.0).unwrap();
        assert!(matches!(eta(k, 1.0), Err(Error::Domain(_))));
        assert!(matches!(eta(k, 0.5), Err(Error::Domain(_))));
        assert!(matches!(ProfileKind::deformed(0.0), Err(Error::Domain(_))));
        assert!(matches!(eta(ProfileKind::Cone, -1.0), Err(Error::Domain(_))));
        assert_eq!(f_value(k, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn series_and_hyperbolic_jets_agree_at_switch() {
        let t = 0.37;
        let s = t * (1.0 + SERIES_MAX_X);
        let a = deformed_eta_jet(t, s * (1.0 - 1e-13));
        let b = deformed_eta_jet(t, s * (1.0 + 1e-13));
        for k in 0..5 {
            let (x, y) = (a.derivative(k), b.derivative(k));
            assert!((x - y).abs() <= 1e-10 * y.abs(), "order {k}: {x} vs {y}");
        }
    }

    #[test]
    fn jet_value_matches_closed_form() {
        for t in [1e-3, 0.2, 1.0] {
            for ratio in [1.0 + 1e-9, 1.001, 1.1, 1.25, 1.3, 3.0, 1e3, 1e6] {
                let s = t * ratio;
                let j = deformed_eta_jet(t, s).value();
                assert!(rel(j, deformed_eta(t, s)) < 1e-13, "t {t} ratio {ratio}");
            }
        }
    }

    #[test]
    fn derivatives_pass_internal_verification_across_scales() {
        for t in [1e-3, 0.05, 1.0] {
            for ratio in [1.0 + 1e-8, 1.001, 1.2, 1.3, 10.0, 1e3, 1e5] {
                let k = ProfileKind::deformed(t).unwrap();
                let e = derivatives(k, t * ratio).unwrap();
                assert!(e.ode_residual < 1e-9);
            }
        }
        for s in [1e-4, 0.3, 1.0, 50.0, 1e4] {
            derivatives(ProfileKind::Resolved, s).unwrap();
            derivatives(ProfileKind::Cone, s).unwrap();
        }
    }
}
