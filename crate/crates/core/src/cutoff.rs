//! Cutoff functions for gluing the cone metric into a compact manifold.
//!
//! [`ChiSpec`] is the explicit `C²` cutoff `χ` that is the identity on
//! `[0, 2^{4/3}]`, is constant beyond `n^{4/3}`, and whose derivative deficits
//! `χ′` and `2χ′ + sχ″` are of order `n^{−11/3}` on `[2^{4/3}, (n−1)^{4/3}]`
//! and `n^{−5/3}` on `[(n−1)^{4/3}, n^{4/3}]`. [`SmoothStep`] is the quintic
//! plateau step used for `σ` and `ρ`.

use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::{Error, Result};

/// Piecewise `χ`: identity, cubic `φ`, inverse law `A − τ/s`, quartic patch, constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSpec {
    pub n: u32,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `τ = c2² χ′(c2)`, the constant value of `s² χ′` on `[c2, c3]`.
    pub tau_const: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub chi_c2: f64,
    pub chi_c3: f64,
    pub final_value: f64,
}

impl ChiSpec {
    pub fn new(n: u32) -> Result<Self> {
        if n < 4 {
            return domain(format!("cutoff needs n >= 4, got {n}"));
        }
        let c1 = 2f64.powf(4.0 / 3.0);
        // 2φ′ + sφ″ = 2 − 6c1 x − 12x² vanishes at the positive root x*.
        let xs = (-6.0 * c1 + (36.0 * c1 * c1 + 96.0).sqrt()) / 24.0;
        let c2 = c1 + xs;
        let chi_c2 = c1 + xs - xs.powi(3);
        let tau_const = c2 * c2 * (1.0 - 3.0 * xs * xs);
        let c3 = ((n - 1) as f64).powf(4.0 / 3.0);
        let c4 = (n as f64).powf(4.0 / 3.0);
        let l = c4 - c3;
        let a0 = tau_const / (c3 * c3);
        let a1 = -2.0 * tau_const / c3.powi(3);
        let a2 = tau_const * (4.0 * c4 - 7.0 * c3) / (c3.powi(3) * l * l);
        let a3 = 2.0 * tau_const * (2.0 * c3 - c4) / (c3.powi(3) * l.powi(3));
        let chi_c3 = chi_c2 + tau_const / c2 - tau_const / c3;
        let final_value = chi_c3 + a0 * l + a1 * l * l / 2.0 + a2 * l.powi(3) / 3.0 + a3 * l.powi(4) / 4.0;
        Ok(Self { n, c1, c2, c3, c4, tau_const, a0, a1, a2, a3, chi_c2, chi_c3, final_value })
    }

    /// `χ^{(deriv)}(s)` for `deriv ∈ {0, 1, 2}`; breakpoints use the left piece.
    ///
    /// # Panics
    ///
    /// Panics if `deriv > 2`.
    pub fn eval(&self, s: f64, deriv: usize) -> f64 {
        assert!(deriv <= 2, "χ is evaluated up to its second derivative");
        if s <= self.c1 {
            [s, 1.0, 0.0][deriv]
        } else if s <= self.c2 {
            let x = s - self.c1;
            [self.c1 + x - x.powi(3), 1.0 - 3.0 * x * x, -6.0 * x][deriv]
        } else if s <= self.c3 {
            let t = self.tau_const;
            [self.chi_c2 + t / self.c2 - t / s, t / (s * s), -2.0 * t / s.powi(3)][deriv]
        } else if s <= self.c4 {
            let x = s - self.c3;
            match deriv {
                0 => self.chi_c3 + x * (self.a0 + x * (self.a1 / 2.0 + x * (self.a2 / 3.0 + x * self.a3 / 4.0))),
                1 => self.psi(x),
                _ => self.psi_prime(x),
            }
        } else {
            [self.final_value, 0.0, 0.0][deriv]
        }
    }

    /// `ψ = χ′` on `[c3, c4]` as a function of `x = s − c3`.
    pub fn psi(&self, x: f64) -> f64 {
        self.a0 + x * (self.a1 + x * (self.a2 + x * self.a3))
    }

    pub fn psi_prime(&self, x: f64) -> f64 {
        self.a1 + x * (2.0 * self.a2 + 3.0 * x * self.a3)
    }

    /// `2χ′ + sχ″`.
    pub fn law(&self, s: f64) -> f64 {
        2.0 * self.eval(s, 1) + s * self.eval(s, 2)
    }

    pub fn breakpoints(&self) -> [f64; 4] {
        [self.c1, self.c2, self.c3, self.c4]
    }

    /// `2χ′ + sχ″` shifted up by its rounding error bound, so that a law that
    /// vanishes identically does not register a spurious deficit.
    fn law_with_rounding(&self, s: f64) -> f64 {
        let (a, b) = (2.0 * self.eval(s, 1), s * self.eval(s, 2));
        a + b + 8.0 * f64::EPSILON * (a.abs() + b.abs())
    }

    /// Jumps `χ^{(k)}(b⁺) − χ^{(k)}(b⁻)` at the four breakpoints, `k = 0, 1, 2`.
    pub fn jumps(&self) -> [[f64; 3]; 4] {
        let mut out = [[0.0; 3]; 4];
        for (i, b) in self.breakpoints().into_iter().enumerate() {
            let right = self.right_piece(i, b);
            for k in 0..3 {
                out[i][k] = right[k] - self.eval(b, k);
            }
        }
        out
    }

    fn right_piece(&self, i: usize, s: f64) -> [f64; 3] {
        match i {
            0 => {
                let x = s - self.c1;
                [self.c1 + x - x.powi(3), 1.0 - 3.0 * x * x, -6.0 * x]
            }
            1 => {
                let t = self.tau_const;
                [self.chi_c2 + t / self.c2 - t / s, t / (s * s), -2.0 * t / s.powi(3)]
            }
            2 => [self.chi_c3, self.psi(0.0), self.psi_prime(0.0)],
            _ => [self.final_value, 0.0, 0.0],
        }
    }
}

/// Grid minima and scaled deficits of `χ` for one value of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiBoundsRow {
    pub n: u32,
    /// Minima of `χ′` and `2χ′ + sχ″` on `[c1, c3]`.
    pub min_chi1_mid: f64,
    pub min_law_mid: f64,
    /// Minima of `χ′` and `2χ′ + sχ″` on `[c3, c4]`.
    pub min_chi1_patch: f64,
    pub min_law_patch: f64,
    pub a2: f64,
    pub a3: f64,
    /// `n^{11/3}·deficit` on `[c1, c3]`, `n^{5/3}·deficit` on `[c3, c4]`,
    /// `n^{10/3}|a2|`, `n^{11/3} a3`.
    pub scaled: ScaledDeficits,
    pub c1_hat: f64,
    pub identity_on_first_segment: bool,
    pub constant_tail: bool,
    pub coefficient_signs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledDeficits {
    pub chi1_mid: f64,
    pub law_mid: f64,
    pub chi1_patch: f64,
    pub law_patch: f64,
    pub a2: f64,
    pub a3: f64,
}

impl ScaledDeficits {
    fn max(&self) -> f64 {
        [self.chi1_mid, self.law_mid, self.chi1_patch, self.law_patch, self.a2, self.a3].into_iter().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiBoundsReport {
    pub rows: Vec<ChiBoundsRow>,
    /// Largest per-`n` constant.
    pub c1_hat: f64,
    /// `(max − min) / max` of the per-`n` constants.
    pub c1_hat_variation: f64,
    pub items_hold: bool,
}

const GRID: usize = 20_001;

fn grid_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, log: bool) -> f64 {
    (0..GRID)
        .map(|i| {
            let u = i as f64 / (GRID - 1) as f64;
            let s = if log { a * (b / a).powf(u) } else { a + (b - a) * u };
            f(s.clamp(a, b))
        })
        .fold(f64::INFINITY, f64::min)
}

fn deficit(min: f64) -> f64 {
    (-min).max(0.0)
}

/// Checks the cutoff bounds on dense grids for every `n` in `n_list`.
///
/// Fails with a verification error when a scaled deficit at the largest `n`
/// exceeds its value at the smallest `n` by more than 20%.
pub fn verify_chi_bounds(n_list: &[u32]) -> Result<ChiBoundsReport> {
    if n_list.is_empty() {
        return domain("empty list of n");
    }
    if let Some(bad) = n_list.iter().find(|&&n| n < 10) {
        return domain(format!("bounds are checked for n >= 10, got {bad}"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let c = ChiSpec::new(n)?;
        let nf = n as f64;
        let min_chi1_mid = grid_min(|s| c.eval(s, 1), c.c1, c.c3, true);
        let min_law_mid = grid_min(|s| c.law_with_rounding(s), c.c1, c.c3, true);
        let min_chi1_patch = grid_min(|s| c.eval(s, 1), c.c3, c.c4, false);
        let min_law_patch = grid_min(|s| c.law_with_rounding(s), c.c3, c.c4, false);
        let scaled = ScaledDeficits {
            chi1_mid: deficit(min_chi1_mid) * nf.powf(11.0 / 3.0),
            law_mid: deficit(min_law_mid) * nf.powf(11.0 / 3.0),
            chi1_patch: deficit(min_chi1_patch) * nf.powf(5.0 / 3.0),
            law_patch: deficit(min_law_patch) * nf.powf(5.0 / 3.0),
            a2: c.a2.abs() * nf.powf(10.0 / 3.0),
            a3: c.a3.abs() * nf.powf(11.0 / 3.0),
        };
        let identity_on_first_segment = (0..=100).all(|i| {
            let s = c.c1 * i as f64 / 100.0;
            c.eval(s, 0) == s && c.eval(s, 1) == 1.0
        });
        let constant_tail = [c.c4 * (1.0 + 1e-9), c.c4 + 1.0, 2.0 * c.c4]
            .iter()
            .all(|&s| c.eval(s, 1) == 0.0 && c.eval(s, 0) == c.final_value);
        rows.push(ChiBoundsRow {
            n,
            min_chi1_mid,
            min_law_mid,
            min_chi1_patch,
            min_law_patch,
            a2: c.a2,
            a3: c.a3,
            c1_hat: scaled.max(),
            scaled,
            identity_on_first_segment,
            constant_tail,
            coefficient_signs: c.a2 < 0.0 && c.a3 > 0.0,
        });
    }
    let c1_hat = rows.iter().map(|r| r.c1_hat).fold(0.0, f64::max);
    let c1_min = rows.iter().map(|r| r.c1_hat).fold(f64::INFINITY, f64::min);
    let c1_hat_variation = if c1_hat > 0.0 { (c1_hat - c1_min) / c1_hat } else { 0.0 };

    let (first, last) = (&rows[0].scaled, &rows[rows.len() - 1].scaled);
    let pairs = [
        ("χ′ on [c1, c3]", first.chi1_mid, last.chi1_mid),
        ("2χ′ + sχ″ on [c1, c3]", first.law_mid, last.law_mid),
        ("χ′ on [c3, c4]", first.chi1_patch, last.chi1_patch),
        ("2χ′ + sχ″ on [c3, c4]", first.law_patch, last.law_patch),
        ("|a2|", first.a2, last.a2),
        ("a3", first.a3, last.a3),
    ];
    if rows.len() > 1 {
        for (name, a, b) in pairs {
            if b > 1.2 * a + 1e-300 {
                return Err(Error::Verification(format!("scaled deficit of {name} grows with n: {a:e} -> {b:e}")));
            }
        }
    }

    let items_hold = rows.iter().all(|r| {
        let nf = r.n as f64;
        r.identity_on_first_segment
            && r.constant_tail
            && r.coefficient_signs
            && r.min_chi1_mid >= -c1_hat * nf.powf(-11.0 / 3.0)
            && r.min_law_mid >= -c1_hat * nf.powf(-11.0 / 3.0)
            && r.min_chi1_patch >= -c1_hat * nf.powf(-5.0 / 3.0)
            && r.min_law_patch >= -c1_hat * nf.powf(-5.0 / 3.0)
            && r.a2 >= -c1_hat * nf.powf(-10.0 / 3.0)
            && r.a3 <= c1_hat * nf.powf(-11.0 / 3.0)
    });
    Ok(ChiBoundsReport { rows, c1_hat, c1_hat_variation, items_hold })
}

/// Decreasing quintic step: 1 for `s ≤ lo`, 0 for `s ≥ hi`, `C²` at both joins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothStep {
    pub lo: f64,
    pub hi: f64,
}

impl SmoothStep {
    pub const DEGREE: u32 = 5;

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo < hi && lo.is_finite() && hi.is_finite() {
            Ok(Self { lo, hi })
        } else {
            domain(format!("step needs lo < hi, got [{lo}, {hi}]"))
        }
    }

    /// The gluing step `σ`, plateaus at 1 and 4.
    pub fn sigma() -> Self {
        Self { lo: 1.0, hi: 4.0 }
    }

    /// The tip step `ρ`, plateaus at 5/8 and 7/8.
    pub fn rho() -> Self {
        Self { lo: 0.625, hi: 0.875 }
    }

    /// Value or derivative of order `deriv ∈ {0, 1, 2}`.
    ///
    /// # Panics
    ///
    /// Panics if `deriv > 2`.
    pub fn eval(&self, s: f64, deriv: usize) -> f64 {
        assert!(deriv <= 2, "smooth steps are evaluated up to their second derivative");
        let w = self.hi - self.lo;
        if s <= self.lo {
            return [1.0, 0.0, 0.0][deriv];
        }
        if s >= self.hi {
            return [0.0, 0.0, 0.0][deriv];
        }
        let u = (s - self.lo) / w;
        match deriv {
            0 => 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u),
            1 => -30.0 * u * u * (1.0 - u) * (1.0 - u) / w,
            _ => -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (w * w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakpoint_constants() {
        let c = ChiSpec::new(100).unwrap();
        let c1 = 2f64.powf(4.0 / 3.0);
        let xs = (-6.0 * c1 + (36.0 * c1 * c1 + 96.0).sqrt()) / 24.0;
        assert!((xs - 0.1208).abs() < 1e-4);
        assert!((c.c2 - 2.6406).abs() < 1e-4);
        assert!(c.c1 < c.c2 && c.c2 < c.c3 && c.c3 < c.c4);
        assert_eq!(c.eval(1.0, 0), 1.0);
        assert_eq!(c.eval(c1, 1), 1.0);
        assert_eq!(c.eval(c.c4 + 1.0, 1), 0.0);
        let tau = c.c2 * c.c2 * (1.0 - 3.0 * (c.c2 - c.c1).powi(2));
        assert!((c.a0 - tau / c.c3.powi(2)).abs() < 1e-15 * c.a0);
    }

    #[test]
    fn small_n_is_rejected() {
        assert!(matches!(ChiSpec::new(3), Err(Error::Domain(_))));
        assert!(ChiSpec::new(4).is_ok());
        assert!(matches!(verify_chi_bounds(&[9]), Err(Error::Domain(_))));
    }

    #[test]
    fn continuity_at_breakpoints() {
        for n in [4, 10, 100, 1000] {
            let c = ChiSpec::new(n).unwrap();
            for (i, j) in c.jumps().iter().enumerate() {
                let scale = c.eval(c.breakpoints()[i], 0).abs().max(1.0);
                assert!(j[0].abs() < 1e-12 * scale, "n {n} breakpoint {i} value jump {}", j[0]);
                assert!(j[1].abs() < 1e-12, "n {n} breakpoint {i} slope jump {}", j[1]);
                assert!(j[2].abs() < 1e-12, "n {n} breakpoint {i} curvature jump {}", j[2]);
            }
        }
    }

    #[test]
    fn inverse_law_segment_is_exact() {
        let c = ChiSpec::new(200).unwrap();
        for i in 0..=1000 {
            let s = c.c2 + (c.c3 - c.c2) * i as f64 / 1000.0;
            assert!(c.law(s).abs() < 1e-12, "s {s}: {}", c.law(s));
        }
    }

    #[test]
    fn patch_interpolates_endpoint_data() {
        let c = ChiSpec::new(60).unwrap();
        let l = c.c4 - c.c3;
        assert!(c.psi(l).abs() < 1e-10 * c.a0);
        assert!(c.psi_prime(l).abs() < 1e-10 * c.a1.abs());
        assert!((c.psi(0.0) - c.tau_const / c.c3.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn first_cubic_piece_has_nonnegative_law() {
        let c = ChiSpec::new(50).unwrap();
        for i in 0..=100 {
            let s = c.c1 + (c.c2 - c.c1) * i as f64 / 100.0;
            assert!(c.eval(s, 1) > 0.0);
            assert!(c.law(s) >= -1e-14);
        }
    }

    fn cubic_min_closed_form(c: &ChiSpec) -> f64 {
        // 2ψ(x) + (c3 + x)ψ′(x) = p0 + p1 x + p2 x² + p3 x³
        let p0 = 2.0 * c.a0 + c.c3 * c.a1;
        let p1 = 2.0 * c.a1 + c.a1 + 2.0 * c.a2 * c.c3;
        let p2 = 2.0 * c.a2 + 2.0 * c.a2 + 3.0 * c.a3 * c.c3;
        let p3 = 2.0 * c.a3 + 3.0 * c.a3;
        let f = |x: f64| p0 + x * (p1 + x * (p2 + x * p3));
        let l = c.c4 - c.c3;
        let (qa, qb, qc) = (3.0 * p3, 2.0 * p2, p1);
        let disc = qb * qb - 4.0 * qa * qc;
        let mut cands = vec![0.0, l];
        if disc >= 0.0 {
            for sgn in [-1.0, 1.0] {
                let x = (-qb + sgn * disc.sqrt()) / (2.0 * qa);
                if (0.0..=l).contains(&x) {
                    cands.push(x);
                }
            }
        }
        cands.into_iter().map(f).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn grid_minimum_matches_closed_form_minimum_of_the_patch() {
        let report = verify_chi_bounds(&[50, 100, 500, 1000]).unwrap();
        for row in &report.rows {
            let c = ChiSpec::new(row.n).unwrap();
            let exact = cubic_min_closed_form(&c);
            assert!((row.min_law_patch - exact).abs() < 1e-6 * exact.abs(), "n {}", row.n);
        }
        assert!(report.c1_hat_variation < 0.2);
        assert!(report.items_hold);
        for row in &report.rows {
            assert!(row.a2 < 0.0 && row.a3 > 0.0);
            assert_eq!(row.scaled.law_mid, 0.0);
            assert_eq!(row.scaled.chi1_mid, 0.0);
        }
    }

    #[test]
    fn smoothstep_plateaus_and_monotonicity() {
        let s = SmoothStep::sigma();
        assert_eq!(s.eval(0.5, 0), 1.0);
        assert_eq!(s.eval(5.0, 0), 0.0);
        for i in 1..1000 {
            let x = 1.0 + 3.0 * i as f64 / 1000.0;
            // derivative factors as −30u²(1−u)²/w, negative inside the ramp
            assert!(s.eval(x, 1) < 0.0);
            assert!(s.eval(x + 3e-3, 0) < s.eval(x, 0));
        }
        let r = SmoothStep::rho();
        for edge in [r.lo, r.hi] {
            for k in 0..3 {
                let a = r.eval(edge - 1e-12, k);
                let b = r.eval(edge + 1e-12, k);
                assert!((a - b).abs() < 1e-6, "order {k} at {edge}");
            }
        }
    }
}
