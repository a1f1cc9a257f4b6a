//! Grid studies of the deformed profiles: monotonicity of `η³/r⁴`, convergence
//! to the cone as `t → 0`, derivative ratio bands and scale-invariant
//! derivative constants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eta_jet, f_prime_jet, f_value, tau, ProfileKind};
use crate::error::domain;
use crate::Result;

/// Samples of `h(τ) = η³/r⁴` and of the auxiliary `h₁(τ)` whose positivity
/// makes `h` increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneWitness {
    pub tau_grid: Vec<f64>,
    pub r2_values: Vec<f64>,
    pub h_values: Vec<f64>,
    pub h1_values: Vec<f64>,
    pub h_increasing: bool,
    pub h1_positive: bool,
}

impl MonotoneWitness {
    pub fn holds(&self) -> bool {
        self.h_increasing && self.h1_positive
    }
}

pub fn monotonicity_witness(t: f64, tau_grid: &[f64]) -> Result<MonotoneWitness> {
    ProfileKind::deformed(t)?;
    if let Some(bad) = tau_grid.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return domain(format!("τ must be positive, got {bad}"));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain("τ grid must be strictly increasing");
    }
    let h_values: Vec<f64> = tau_grid.iter().map(|&x| tau::h(x)).collect();
    let h1_values: Vec<f64> = tau_grid.iter().map(|&x| tau::h1(x)).collect();
    Ok(MonotoneWitness {
        tau_grid: tau_grid.to_vec(),
        r2_values: tau_grid.iter().map(|&x| t * x.cosh()).collect(),
        h_increasing: h_values.windows(2).all(|w| w[1] > w[0]),
        h1_positive: h1_values.iter().all(|&v| v > 0.0),
        h_values,
        h1_values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub t: f64,
    pub sup_error: f64,
}

/// Sup-norm distance between `f_t^{(k)}` and the cone's `f_0^{(k)}` on `[delta, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub k: usize,
    pub delta: f64,
    pub grid_size: usize,
    pub rows: Vec<ConvergenceRow>,
    pub strictly_decreasing: bool,
}

fn profile_for(t: f64) -> Result<ProfileKind> {
    if t == 0.0 {
        Ok(ProfileKind::Cone)
    } else {
        ProfileKind::deformed(t)
    }
}

fn derivative_of_order(kind: ProfileKind, k: usize, s: f64) -> Result<f64> {
    if k == 0 {
        f_value(kind, s)
    } else {
        Ok(f_prime_jet(kind, s)?.derivative(k - 1))
    }
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn convergence_table(k: usize, delta: f64, t_list: &[f64], grid_size: usize) -> Result<ConvergenceTable> {
    if k > 2 {
        return domain(format!("derivative order {k} is not covered by the convergence study"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    if grid_size < 2 {
        return domain("grid needs at least two points");
    }
    if let Some(bad) = t_list.iter().find(|&&t| !(t >= 0.0 && t < delta)) {
        return domain(format!("t = {bad} outside [0, delta)"));
    }
    let grid = uniform(delta, 1.0, grid_size);
    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let kind = profile_for(t)?;
        let errs: Result<Vec<f64>> = grid
            .par_iter()
            .map(|&s| Ok((derivative_of_order(kind, k, s)? - derivative_of_order(ProfileKind::Cone, k, s)?).abs()))
            .collect();
        let sup_error = errs?.into_iter().fold(0.0, f64::max);
        rows.push(ConvergenceRow { t, sup_error });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error);
    Ok(ConvergenceTable { k, delta, grid_size, rows, strictly_decreasing })
}

/// Extremal ratios `f_t′/f_0′` and `f_t″/f_0″` on `[delta_prime, delta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub t: f64,
    pub delta_prime: f64,
    pub delta: f64,
    pub first_ratio_min: f64,
    pub first_ratio_max: f64,
    pub second_ratio_min: f64,
    pub second_ratio_max: f64,
    pub holds: bool,
    /// First grid point where a ratio leaves `[1/2, 2]`, if any.
    pub failure_point: Option<f64>,
    /// Largest `t` in `(0, delta_prime)` for which the bands hold on the grid.
    pub alpha_estimate: f64,
}

struct Bands {
    r1: (f64, f64),
    r2: (f64, f64),
    failure: Option<f64>,
}

fn in_band(r: f64) -> bool {
    (0.5..=2.0).contains(&r)
}

fn bands(t: f64, grid: &[f64]) -> Result<Bands> {
    let kind = profile_for(t)?;
    let ratios: Result<Vec<(f64, f64, f64)>> = grid
        .par_iter()
        .map(|&s| {
            let ft = f_prime_jet(kind, s)?;
            let f0 = f_prime_jet(ProfileKind::Cone, s)?;
            Ok((s, ft.derivative(0) / f0.derivative(0), ft.derivative(1) / f0.derivative(1)))
        })
        .collect();
    let ratios = ratios?;
    let mut b = Bands { r1: (f64::INFINITY, f64::NEG_INFINITY), r2: (f64::INFINITY, f64::NEG_INFINITY), failure: None };
    for &(s, a, c) in &ratios {
        b.r1 = (b.r1.0.min(a), b.r1.1.max(a));
        b.r2 = (b.r2.0.min(c), b.r2.1.max(c));
        if b.failure.is_none() && !(in_band(a) && in_band(c)) {
            b.failure = Some(s);
        }
    }
    Ok(b)
}

pub fn ratio_bounds(delta_prime: f64, delta: f64, t: f64, grid_size: usize) -> Result<RatioReport> {
    if !(delta_prime > 0.0 && delta_prime < delta && delta < 0.25) {
        return domain(format!("need 0 < delta' < delta < 1/4, got {delta_prime}, {delta}"));
    }
    if !(t >= 0.0 && t < delta_prime) {
        return domain(format!("t = {t} must lie in [0, delta')"));
    }
    if grid_size < 2 {
        return domain("grid needs at least two points");
    }
    let grid = uniform(delta_prime, delta, grid_size);
    let here = bands(t, &grid)?;

    let mut hi = delta_prime * (1.0 - 1e-6);
    let alpha_estimate = if bands(hi, &grid)?.failure.is_none() {
        hi
    } else {
        let mut lo = delta_prime * 1e-9;
        if bands(lo, &grid)?.failure.is_some() {
            0.0
        } else {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if bands(mid, &grid)?.failure.is_none() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    };

    Ok(RatioReport {
        t,
        delta_prime,
        delta,
        first_ratio_min: here.r1.0,
        first_ratio_max: here.r1.1,
        second_ratio_min: here.r2.0,
        second_ratio_max: here.r2.1,
        holds: here.failure.is_none(),
        failure_point: here.failure,
        alpha_estimate,
    })
}

/// Scale-invariant derivative constants of a deformed profile over a grid.
///
/// `sup[k]` is the supremum of `|f^{(k+1)}| r^{β_k} (1 − ε)^{γ_k}` with
/// `β = (2/3, 8/3, 14/3, 20/3)` and `γ = (0, 0, 1, 2)`, where `r = √(r²)` and
/// `ε = t / r²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub t: f64,
    pub points: usize,
    pub sup: [f64; 4],
    pub eta_prime_scaled_min: f64,
    pub eta_prime_scaled_max: f64,
}

impl AsymptoticConstants {
    pub fn eta_prime_in_unit_interval(&self) -> bool {
        self.eta_prime_scaled_min > 0.0 && self.eta_prime_scaled_max < 1.0
    }
}

pub fn asymptotic_constants(t: f64, r2_grid: &[f64]) -> Result<AsymptoticConstants> {
    let kind = ProfileKind::deformed(t)?;
    if let Some(bad) = r2_grid.iter().find(|&&r2| !(t / r2 <= 1.0 - 1e-3)) {
        return domain(format!("r² = {bad} too close to the tip t = {t}"));
    }
    let rows: Result<Vec<([f64; 4], f64)>> = r2_grid
        .par_iter()
        .map(|&s| {
            let ej = eta_jet(kind, s)?;
            let fp = f_prime_jet(kind, s)?;
            let eps = t / s;
            let r23 = s.cbrt();
            let scaled = [
                fp.derivative(0).abs() * r23,
                fp.derivative(1).abs() * r23.powi(4),
                fp.derivative(2).abs() * r23.powi(7) * (1.0 - eps),
                fp.derivative(3).abs() * r23.powi(10) * (1.0 - eps).powi(2),
            ];
            Ok((scaled, r23 * ej.derivative(1)))
        })
        .collect();
    let rows = rows?;
    let mut sup = [0.0f64; 4];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (c, e) in &rows {
        for k in 0..4 {
            sup[k] = sup[k].max(c[k]);
        }
        lo = lo.min(*e);
        hi = hi.max(*e);
    }
    Ok(AsymptoticConstants { t, points: rows.len(), sup, eta_prime_scaled_min: lo, eta_prime_scaled_max: hi })
}
