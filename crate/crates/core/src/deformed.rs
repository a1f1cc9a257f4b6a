//! The deformed conifold `V_t = {Σ w_a² = t} ⊂ C⁴` near the base point
//! `q = (a, ia, 0, √t)`, `a = √((r² − t)/2)`, of the `SO(4)` orbit of radius `r`.
//!
//! The chart `(z₁, z₂, z₃)` at `q` is
//!
//! ```text
//! w₁ = w₁(q) + 2t/(r²+t)·u₁ − i(r²−t)/(r²+t)·u₂,   w₂ = w₂(q) + u₂,   w₃ = u₃,
//! z₁ = s₁u₁,  z₂ = s₂u₂,  z₃ = s₃u₃,
//! s₁ = (2tη/(r²(r²+t)))^{1/2},  s₂ = (4r⁴/(3η²(r²+t)))^{1/2},  s₃ = (η/r²)^{1/2},
//! ```
//!
//! with `w₄ = (t − w₁² − w₂² − w₃²)^{1/2}` on the branch through `w₄(q) = √t`.
//! In these coordinates the Candelas–de la Ossa metric `i∂∂̄f_t(r²)` is the
//! identity at `q`.
//!
//! Partial derivatives of `r² = Σ|w_a|²` are available in three independent
//! forms: the closed-form table ([`printed_partials`]), exact chart algebra
//! ([`ChartJet::partial`]) and finite differences of `r²` along real
//! perturbations of `z` ([`fd_partial`]). The curvature tensor is assembled
//! from the table by a Faà di Bruno expansion and cross-checked against finite
//! differences of the metric field.

use nalgebra::{Matrix5, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::frame::CMatrix3;
use crate::numerics::fd;
use crate::radial::{self, ProfileKind};
use crate::{Error, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);
const SQRT_6: f64 = 2.449_489_742_783_178;

/// Curvature is evaluated only for `r² ≥ t(1 + CURVATURE_GUARD)`.
pub const CURVATURE_GUARD: f64 = 1e-3;
/// Tolerance on `‖g(q) − I‖_∞`.
pub const METRIC_TOL: f64 = 1e-10;
/// Agreement of the closed-form table with exact chart algebra, relative to the largest entry of each order.
pub const CHART_TOL: f64 = 1e-12;
/// Finite-difference agreement for entries of order at most two.
pub const FD_TOL_LOW: f64 = 1e-5;
/// Finite-difference agreement for entries of order three and four.
pub const FD_TOL_HIGH: f64 = 1e-3;
/// Relative agreement of the finite-difference curvature on dominant components.
pub const CURVATURE_FD_TOL: f64 = 1e-3;
/// Components with `|R| ≥ DOMINANT_FRACTION · max|R|` count as dominant.
pub const DOMINANT_FRACTION: f64 = 1e-2;

type Mat3 = [[C; 3]; 3];

fn deformed(t: f64) -> Result<ProfileKind> {
    ProfileKind::deformed(t)
}

/// The base point `q` of the orbit through radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    pub t: f64,
    pub r2: f64,
    pub w: [C; 4],
}

impl QPoint {
    /// Relative residuals of `Σ w_a² = t` and `Σ |w_a|² = r²`.
    pub fn constraint_residuals(&self) -> (f64, f64) {
        let quad: C = self.w.iter().map(|w| w * w).sum();
        let norm: f64 = self.w.iter().map(|w| w.norm_sqr()).sum();
        ((quad - self.t).norm() / self.t, (norm - self.r2).abs() / self.r2)
    }
}

/// `q = (a, ia, 0, √t)` with `a = √((r² − t)/2)`; `r² = t` gives the tip `(0, 0, 0, √t)`.
pub fn q_point(t: f64, r2: f64) -> Result<QPoint> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("deformation parameter must be positive, got {t}"));
    }
    if !(r2 >= t && r2.is_finite()) {
        return domain(format!("r² = {r2} lies below the tip t = {t}"));
    }
    let a = (0.5 * (r2 - t)).sqrt();
    Ok(QPoint { t, r2, w: [C::new(a, 0.0), C::new(0.0, a), ZERO, C::new(t.sqrt(), 0.0)] })
}

/// The chart `z ↦ w` centred at `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartMap {
    pub q: QPoint,
    pub eta: f64,
    /// `(s₁, s₂, s₃)` with `z_i = s_i u_i`.
    pub scale: [f64; 3],
    /// `J_{ai} = ∂w_a/∂z_i` for `a ≤ 3`.
    pub jacobian: Mat3,
}

impl ChartMap {
    pub fn new(t: f64, r2: f64) -> Result<Self> {
        let q = q_point(t, r2)?;
        let eta = radial::eta(deformed(t)?, r2)?;
        let sum = r2 + t;
        let scale =
            [(2.0 * t * eta / (r2 * sum)).sqrt(), (4.0 * r2 * r2 / (3.0 * eta * eta * sum)).sqrt(), (eta / r2).sqrt()];
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return domain(format!("chart scalings degenerate at t = {t}, r² = {r2}"));
        }
        let mut jacobian = [[ZERO; 3]; 3];
        jacobian[0][0] = C::new(2.0 * t / (sum * scale[0]), 0.0);
        jacobian[0][1] = C::new(0.0, -(r2 - t) / (sum * scale[1]));
        jacobian[1][1] = C::new(1.0 / scale[1], 0.0);
        jacobian[2][2] = C::new(1.0 / scale[2], 0.0);
        Ok(Self { q, eta, scale, jacobian })
    }

    pub fn t(&self) -> f64 {
        self.q.t
    }

    pub fn r2(&self) -> f64 {
        self.q.r2
    }

    /// Distance in `z` over which `r²` and the metric vary appreciably, `√(tη)/r`.
    pub fn length_scale(&self) -> f64 {
        (self.t() * self.eta / self.r2()).sqrt()
    }

    /// `(w₁, w₂, w₃, w₄)` at `z`.
    pub fn w_at(&self, z: &[C; 3]) -> Result<[C; 4]> {
        let mut w = self.q.w;
        for (a, wa) in w.iter_mut().take(3).enumerate() {
            *wa += (0..3).map(|i| self.jacobian[a][i] * z[i]).sum::<C>();
        }
        let arg = self.t() - w[0] * w[0] - w[1] * w[1] - w[2] * w[2];
        if arg.re <= 0.0 {
            return domain(format!("z = {z:?} leaves the branch of w₄ through q"));
        }
        w[3] = arg.sqrt();
        Ok(w)
    }

    pub fn r2_at(&self, z: &[C; 3]) -> Result<f64> {
        Ok(self.w_at(z)?.iter().map(|w| w.norm_sqr()).sum())
    }

    /// Holomorphic derivatives of `w` up to second order at `z`.
    pub fn jet(&self, z: &[C; 3]) -> Result<ChartJet> {
        let w = self.w_at(z)?;
        let j = &self.jacobian;
        let d4: [C; 3] = std::array::from_fn(|i| -(0..3).map(|a| w[a] * j[a][i]).sum::<C>() / w[3]);
        let h4: Mat3 = std::array::from_fn(|i| {
            std::array::from_fn(|k| -((0..3).map(|a| j[a][i] * j[a][k]).sum::<C>() + d4[i] * d4[k]) / w[3])
        });
        Ok(ChartJet { w, d4, h4, jacobian: *j })
    }
}

/// `w`, `∂_i w₄` and `∂_i∂_k w₄` at one point of the chart; `w₁, w₂, w₃` are affine in `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartJet {
    pub w: [C; 4],
    pub d4: [C; 3],
    pub h4: Mat3,
    jacobian: Mat3,
}

impl ChartJet {
    fn dw(&self, holo: &[usize], a: usize) -> C {
        match (holo, a) {
            ([], _) => self.w[a],
            ([i], 3) => self.d4[*i],
            ([i], _) => self.jacobian[a][*i],
            ([i, k], 3) => self.h4[*i][*k],
            _ => ZERO,
        }
    }

    pub fn r2(&self) -> f64 {
        self.w.iter().map(|w| w.norm_sqr()).sum()
    }

    /// `∂_I ∂̄_J r² = Σ_a ∂_I w_a · conj(∂_J w_a)` for `|I|, |J| ≤ 2`, indices in `0..3`.
    pub fn partial(&self, holo: &[usize], anti: &[usize]) -> Result<C> {
        check_indices(holo, anti)?;
        Ok((0..4).map(|a| self.dw(holo, a) * self.dw(anti, a).conj()).sum())
    }
}

fn check_indices(holo: &[usize], anti: &[usize]) -> Result<()> {
    if holo.len() > 2 || anti.len() > 2 {
        return domain("partials of r² are available up to order two in each of z and z̄");
    }
    if holo.iter().chain(anti).any(|&i| i > 2) {
        return domain("chart indices run over 0, 1, 2");
    }
    Ok(())
}

/// Partial derivatives of `r²` at `q` in the `z` chart, indices starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialTable {
    pub t: f64,
    pub r2: f64,
    /// `(r²)_i`.
    pub first: [C; 3],
    /// `(r²)_{ij}`.
    pub holomorphic: Mat3,
    /// `(r²)_{ij̄}`.
    pub mixed: Mat3,
    /// `(r²)_{i j̄ k}` keyed `[i, j, k]` with `i ≤ k`; absent keys vanish.
    pub third: Vec<([usize; 3], C)>,
    /// `(r²)_{i j̄ k l̄}` keyed `[i, j, k, l]` with `i ≤ k`, `j ≤ l`; absent keys vanish.
    pub fourth: Vec<([usize; 4], C)>,
}

impl PartialTable {
    /// `∂_I ∂̄_J r²` for `1 ≤ |I| + |J| ≤ 4` with `|I|, |J| ≤ 2`, or `None` when outside the table.
    pub fn get(&self, holo: &[usize], anti: &[usize]) -> Option<C> {
        if check_indices(holo, anti).is_err() {
            return None;
        }
        let mut h = holo.to_vec();
        let mut a = anti.to_vec();
        h.sort_unstable();
        a.sort_unstable();
        let third = |key: [usize; 3]| self.third.iter().find(|(k, _)| *k == key).map_or(ZERO, |(_, v)| *v);
        match (h.as_slice(), a.as_slice()) {
            ([i], []) => Some(self.first[*i]),
            ([], [j]) => Some(self.first[*j].conj()),
            ([i, k], []) => Some(self.holomorphic[*i][*k]),
            ([], [j, l]) => Some(self.holomorphic[*j][*l].conj()),
            ([i], [j]) => Some(self.mixed[*i][*j]),
            ([i, k], [j]) => Some(third([*i, *j, *k])),
            ([j], [i, k]) => Some(third([*i, *j, *k]).conj()),
            ([i, k], [j, l]) => {
                let key = [*i, *j, *k, *l];
                Some(self.fourth.iter().find(|(k, _)| *k == key).map_or(ZERO, |(_, v)| *v))
            }
            _ => None,
        }
    }

    /// Largest modulus among entries of total order `order`.
    pub fn order_scale(&self, order: usize) -> f64 {
        index_sets(order).iter().filter_map(|(h, a)| self.get(h, a)).map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// The table read off exact chart algebra at `q`, every entry kept.
    pub fn from_chart(chart: &ChartMap) -> Result<Self> {
        let jet = chart.jet(&[ZERO; 3])?;
        let p = |h: &[usize], a: &[usize]| jet.partial(h, a);
        let mut third = Vec::new();
        let mut fourth = Vec::new();
        for i in 0..3 {
            for k in i..3 {
                for j in 0..3 {
                    third.push(([i, j, k], p(&[i, k], &[j])?));
                    for l in j..3 {
                        fourth.push(([i, j, k, l], p(&[i, k], &[j, l])?));
                    }
                }
            }
        }
        let mut holomorphic = [[ZERO; 3]; 3];
        let mut mixed = [[ZERO; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                holomorphic[i][j] = p(&[i, j], &[])?;
                mixed[i][j] = p(&[i], &[j])?;
            }
        }
        Ok(Self {
            t: chart.t(),
            r2: chart.r2(),
            first: [p(&[0], &[])?, p(&[1], &[])?, p(&[2], &[])?],
            holomorphic,
            mixed,
            third,
            fourth,
        })
    }
}

/// Representative index sets `(I, J)` of total order `order` with `|I| ≥ |J|` or
/// `|J| = |I| + 1`; every other entry is a conjugate or permutation of one of these.
pub fn index_sets(order: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    let pairs = || (0..3).flat_map(|i| (i..3).map(move |k| vec![i, k]));
    let singles = || (0..3).map(|i| vec![i]);
    match order {
        1 => out.extend(singles().map(|h| (h, vec![]))),
        2 => {
            out.extend(pairs().map(|h| (h, vec![])));
            out.extend(singles().flat_map(|h| singles().map(move |a| (h.clone(), a))));
        }
        3 => out.extend(pairs().flat_map(|h| singles().map(move |a| (h.clone(), a)))),
        4 => out.extend(pairs().flat_map(|h| pairs().map(move |a| (h.clone(), a)))),
        _ => {}
    }
    out
}

/// The closed-form table of partial derivatives of `r²` at `q`.
pub fn printed_partials(t: f64, r2: f64) -> Result<PartialTable> {
    let chart = ChartMap::new(t, r2)?;
    let eta = chart.eta;
    let r = r2.sqrt();
    let eps = t / r2;
    let q = ((1.0 - eps) / (1.0 + eps)).sqrt();
    let re = |x: f64| C::new(x, 0.0);
    let im = |x: f64| C::new(0.0, x);

    let first = [ZERO, im(-0.5 * SQRT_6 * (r2 - t).sqrt() * (r2 + t).sqrt() * eta / r2), ZERO];
    let mut mixed = [[ZERO; 3]; 3];
    mixed[0][0] = re(r2 / eta);
    mixed[1][1] = re(1.5 * eta * eta / r2);
    mixed[2][2] = re(r2 / eta);
    let mut holomorphic = [[ZERO; 3]; 3];
    holomorphic[0][0] = re(-r2 / eta);
    holomorphic[1][1] = re(-1.5 * eta * eta * eps / r2);
    holomorphic[2][2] = re(-r2 / eta);

    let outer_third = r.powi(3) * q / (t.sqrt() * eta.powf(1.5));
    let third = vec![
        ([0, 0, 0], re(outer_third)),
        ([0, 1, 0], im(-0.5 * SQRT_6 * q)),
        ([1, 0, 1], re(1.5 * t.sqrt() * eta.powf(1.5) * q / r.powi(3))),
        ([1, 1, 1], im(-0.75 * SQRT_6 * t * eta.powi(3) * q / r.powi(6))),
        ([2, 0, 2], re(outer_third)),
        ([2, 1, 2], im(-0.5 * SQRT_6 * q)),
    ];
    let outer = r2 * r2 / (t * eta * eta);
    let cross = 1.5 * eta / r2;
    let fourth = vec![
        ([0, 0, 0, 0], re(outer)),
        ([0, 1, 0, 1], re(cross)),
        ([1, 0, 1, 0], re(cross)),
        ([1, 1, 1, 1], re(2.25 * t * eta.powi(4) / r2.powi(4))),
        ([0, 2, 0, 2], re(outer)),
        ([2, 0, 2, 0], re(outer)),
        ([2, 2, 2, 2], re(outer)),
        ([1, 2, 1, 2], re(cross)),
        ([2, 1, 2, 1], re(cross)),
    ];
    Ok(PartialTable { t, r2, first, holomorphic, mixed, third, fourth })
}

/// `∂_I ∂̄_J r²` at `q` by finite differences along the six real directions of `z`,
/// combined through `∂_z = (∂_x − i∂_y)/2`, `∂_z̄ = (∂_x + i∂_y)/2`.
pub fn fd_partial(chart: &ChartMap, holo: &[usize], anti: &[usize], step: f64) -> Result<C> {
    check_indices(holo, anti)?;
    let mut terms: Vec<([usize; 6], C)> = vec![([0; 6], C::new(1.0, 0.0))];
    for (&i, sign) in holo.iter().map(|i| (i, -1.0)).chain(anti.iter().map(|i| (i, 1.0))) {
        let mut next = Vec::with_capacity(2 * terms.len());
        for (orders, c) in &terms {
            let mut ox = *orders;
            ox[2 * i] += 1;
            next.push((ox, c * 0.5));
            let mut oy = *orders;
            oy[2 * i + 1] += 1;
            next.push((oy, c * C::new(0.0, 0.5 * sign)));
        }
        terms = next;
    }
    terms.sort_by_key(|a| a.0);
    let mut merged: Vec<([usize; 6], C)> = Vec::new();
    for (o, c) in terms {
        match merged.last_mut() {
            Some((lo, lc)) if *lo == o => *lc += c,
            _ => merged.push((o, c)),
        }
    }
    let f = |x: &[f64]| {
        let z = [C::new(x[0], x[1]), C::new(x[2], x[3]), C::new(x[4], x[5])];
        chart.r2_at(&z).unwrap_or(f64::NAN)
    };
    let x0 = [0.0; 6];
    let value: C = merged.iter().map(|(o, c)| c * fd::mixed_partial(&f, &x0, o, step)).sum();
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::Verification(format!("finite-difference stencil of step {step} leaves the chart")));
    }
    Ok(value)
}

/// One entry of the partial-derivative table in all three forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialCheck {
    pub holo: Vec<usize>,
    pub anti: Vec<usize>,
    pub printed: C,
    pub chart: C,
    pub fd: C,
    /// `|printed − chart|` relative to the largest printed entry of the same order.
    pub chart_err: f64,
    /// `|printed − fd|` relative to the largest printed entry of the same order.
    pub fd_err: f64,
    pub fd_tol: f64,
    pub passes: bool,
}

impl PartialCheck {
    pub fn order(&self) -> usize {
        self.holo.len() + self.anti.len()
    }
}

/// Compares every representative entry of the closed-form table with chart
/// algebra and with finite differences.
pub fn partial_checks(t: f64, r2: f64) -> Result<Vec<PartialCheck>> {
    let chart = ChartMap::new(t, r2)?;
    let printed = printed_partials(t, r2)?;
    let exact = PartialTable::from_chart(&chart)?;
    let len = chart.length_scale();
    let mut out = Vec::new();
    for order in 1..=4 {
        let scale = printed.order_scale(order);
        let (step, fd_tol) = if order <= 2 { (1e-2 * len, FD_TOL_LOW) } else { (2e-2 * len, FD_TOL_HIGH) };
        for (h, a) in index_sets(order) {
            let p = printed.get(&h, &a).expect("representative index set");
            let c = exact.get(&h, &a).expect("representative index set");
            let d = fd_partial(&chart, &h, &a, step)?;
            let chart_err = (p - c).norm() / scale;
            let fd_err = (p - d).norm() / scale;
            let passes = chart_err <= CHART_TOL && fd_err <= fd_tol;
            out.push(PartialCheck { holo: h, anti: a, printed: p, chart: c, fd: d, chart_err, fd_err, fd_tol, passes });
        }
    }
    Ok(out)
}

/// The closed-form table at `q`, verified entry by entry against chart algebra and finite differences.
pub fn r2_partials(t: f64, r2: f64) -> Result<PartialTable> {
    let bad: Vec<String> = partial_checks(t, r2)?
        .into_iter()
        .filter(|c| !c.passes)
        .map(|c| format!("(r²)[{:?}; {:?}] printed {} chart {} fd {}", c.holo, c.anti, c.printed, c.chart, c.fd))
        .collect();
    if !bad.is_empty() {
        return Err(Error::Verification(format!("t = {t}, r² = {r2}: {}", bad.join("; "))));
    }
    printed_partials(t, r2)
}

/// The metric and the two auxiliary forms at `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAtQ {
    pub t: f64,
    pub r2: f64,
    /// `g_{ij̄} = f′(r²)_{ij̄} + f″(r²)_i(r²)_{j̄}`.
    pub g: Mat3,
    /// `∂∂̄r²` as the matrix of `dz_i ∧ dz̄_j` coefficients.
    pub ddbar_r2: Mat3,
    /// `∂r² ∧ ∂̄r²` as the matrix of `dz_i ∧ dz̄_j` coefficients.
    pub dr2_wedge: Mat3,
    /// Diagonal of `∂∂̄r²` written through `η³/r⁴`.
    pub ddbar_closed_form: [f64; 3],
    /// The `dz₂ ∧ dz̄₂` coefficient of `∂r² ∧ ∂̄r²` written through `η³/r⁴`.
    pub dr2_closed_form: f64,
    /// `‖g − I‖_∞`.
    pub identity_defect: f64,
    /// Largest relative deviation of the auxiliary forms from their closed forms.
    pub aux_defect: f64,
}

/// `ω_{co,t}` at `q` assembled from the closed-form table and the radial derivatives.
pub fn metric_at_q(t: f64, r2: f64) -> Result<MetricAtQ> {
    let table = printed_partials(t, r2)?;
    let prof = radial::derivatives(deformed(t)?, r2)?;
    let d = table.first;
    let g: Mat3 =
        std::array::from_fn(|i| std::array::from_fn(|j| table.mixed[i][j] * prof.f1 + d[i] * d[j].conj() * prof.f2));
    let dr2_wedge: Mat3 = std::array::from_fn(|i| std::array::from_fn(|j| d[i] * d[j].conj()));

    let h = prof.eta.powi(3) / (r2 * r2);
    let lead = r2.cbrt() * h.powf(-1.0 / 3.0);
    let ddbar_closed_form = [lead, lead * 1.5 * h, lead];
    let dr2_closed_form = 1.5 * r2.powf(4.0 / 3.0) * h.powf(2.0 / 3.0) * (1.0 - t * t / (r2 * r2));

    let mut identity_defect: f64 = 0.0;
    let mut aux_defect: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            identity_defect = identity_defect.max((g[i][j] - id).norm());
            let want_ddbar = if i == j { ddbar_closed_form[i] } else { 0.0 };
            let want_dr2 = if i == 1 && j == 1 { dr2_closed_form } else { 0.0 };
            aux_defect = aux_defect.max((table.mixed[i][j] - want_ddbar).norm() / ddbar_closed_form[1].min(lead));
            aux_defect = aux_defect.max((dr2_wedge[i][j] - want_dr2).norm() / dr2_closed_form.max(f64::MIN_POSITIVE));
        }
    }
    let out = MetricAtQ {
        t,
        r2,
        g,
        ddbar_r2: table.mixed,
        dr2_wedge,
        ddbar_closed_form,
        dr2_closed_form,
        identity_defect,
        aux_defect,
    };
    if identity_defect > METRIC_TOL {
        return Err(Error::Verification(format!("‖g(q) − I‖ = {identity_defect:e} at t = {t}, r² = {r2}")));
    }
    if aux_defect > 1e-12 {
        return Err(Error::Verification(format!(
            "∂∂̄r² or ∂r²∧∂̄r² deviates from its closed form by {aux_defect:e} at t = {t}, r² = {r2}"
        )));
    }
    Ok(out)
}

/// A derivative slot: chart index and whether it is holomorphic.
type Slot = (usize, bool);

/// All set partitions of `{0, …, n−1}`, as lists of blocks.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = vec![Vec::new()];
    for e in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for b in 0..p.len() {
                let mut q: Vec<Vec<usize>> = p.clone();
                q[b].push(e);
                next.push(q);
            }
            let mut q = p.clone();
            q.push(vec![e]);
            next.push(q);
        }
        out = next;
    }
    out
}

/// `∂_{slots} f(r²)` by Faà di Bruno over set partitions; `derivs[m] = f^{(m)}(r²)`.
fn f_partial(jet: &ChartJet, derivs: &[f64; 5], slots: &[Slot], partitions: &[Vec<Vec<usize>>]) -> Result<C> {
    let mut total = ZERO;
    for p in partitions {
        let mut prod = C::new(derivs[p.len()], 0.0);
        for block in p {
            let holo: Vec<usize> = block.iter().filter(|&&s| slots[s].1).map(|&s| slots[s].0).collect();
            let anti: Vec<usize> = block.iter().filter(|&&s| !slots[s].1).map(|&s| slots[s].0).collect();
            prod *= jet.partial(&holo, &anti)?;
        }
        total += prod;
    }
    Ok(total)
}

/// `R_{i j̄ k l̄}` in the `z` chart, flattened with index `((i·3 + j)·3 + k)·3 + l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTensor {
    pub t: f64,
    pub r2: f64,
    pub components: Vec<C>,
}

impl CurvatureTensor {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> C {
        self.components[((i * 3 + j) * 3 + k) * 3 + l]
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `max|R_{ij̄kl̄}| · r^{4/3}`.
    pub fn scaled_sup(&self) -> f64 {
        self.max_abs() * self.r2.powf(2.0 / 3.0)
    }

    /// Largest violation of `R_{ij̄kl̄} = R_{kj̄il̄} = R_{il̄kj̄}` and
    /// `conj(R_{ij̄kl̄}) = R_{jīlk̄}`, relative to `max|R|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let r = self.get(i, j, k, l);
                        worst = worst
                            .max((r - self.get(k, j, i, l)).norm())
                            .max((r - self.get(i, l, k, j)).norm())
                            .max((r.conj() - self.get(j, i, l, k)).norm());
                    }
                }
            }
        }
        worst / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// `Ric_{ij̄} = Σ_k R_{ij̄kk̄}` in the orthonormal chart at `q`.
    pub fn ricci(&self) -> Mat3 {
        std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| self.get(i, j, k, k)).sum()))
    }

    pub fn ricci_max(&self) -> f64 {
        self.ricci().iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

fn radial_derivs(t: f64, r2: f64) -> Result<[f64; 5]> {
    let p = radial::derivatives(deformed(t)?, r2)?;
    Ok([p.f, p.f1, p.f2, p.f3, p.f4])
}

fn check_guard(t: f64, r2: f64) -> Result<()> {
    if !(t > 0.0) || !(r2 >= t * (1.0 + CURVATURE_GUARD) * (1.0 - 1e-12)) {
        return domain(format!("curvature needs r² ≥ t(1 + {CURVATURE_GUARD}), got t = {t}, r² = {r2}"));
    }
    Ok(())
}

/// `R_{ij̄kl̄} = −f_{ij̄kl̄} + Σ g^{q̄p} f_{ikq̄} f_{pj̄l̄}` at `q`, with every derivative
/// of `f_t(r²)` expanded by Faà di Bruno through exact partials of `r²`.
pub fn curvature_at_q(t: f64, r2: f64) -> Result<CurvatureTensor> {
    check_guard(t, r2)?;
    let chart = ChartMap::new(t, r2)?;
    let jet = chart.jet(&[ZERO; 3])?;
    let derivs = radial_derivs(t, r2)?;
    let p2 = set_partitions(2);
    let p3 = set_partitions(3);
    let p4 = set_partitions(4);

    let mut g = CMatrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            g[(i, j)] = f_partial(&jet, &derivs, &[(i, true), (j, false)], &p2)?;
        }
    }
    let ginv = g.try_inverse().ok_or_else(|| Error::Verification("singular metric at q".into()))?;
    let mut holo3 = [[[ZERO; 3]; 3]; 3];
    let mut anti3 = [[[ZERO; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                holo3[a][b][c] = f_partial(&jet, &derivs, &[(a, true), (b, true), (c, false)], &p3)?;
                anti3[a][b][c] = f_partial(&jet, &derivs, &[(a, true), (b, false), (c, false)], &p3)?;
            }
        }
    }
    let mut components = Vec::with_capacity(81);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let f4 = f_partial(&jet, &derivs, &[(i, true), (j, false), (k, true), (l, false)], &p4)?;
                    let mut quad = ZERO;
                    for q in 0..3 {
                        for p in 0..3 {
                            quad += holo3[i][k][q] * ginv[(q, p)] * anti3[p][j][l];
                        }
                    }
                    components.push(-f4 + quad);
                }
            }
        }
    }
    Ok(CurvatureTensor { t, r2, components })
}

/// The metric `g_{ij̄}(z)` of the chart, from exact second-order partials of `r²` at `z`.
pub fn metric_field(chart: &ChartMap, z: &[C; 3]) -> Result<CMatrix3> {
    let jet = chart.jet(z)?;
    let fp = radial::f_prime_jet(deformed(chart.t())?, jet.r2())?;
    let (f1, f2) = (fp.derivative(0), fp.derivative(1));
    let d: [C; 3] = [jet.partial(&[0], &[])?, jet.partial(&[1], &[])?, jet.partial(&[2], &[])?];
    let mut g = CMatrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            g[(i, j)] = jet.partial(&[i], &[j])? * f1 + d[i] * d[j].conj() * f2;
        }
    }
    Ok(g)
}

/// `R_{ij̄kl̄} = −∂_k∂_l̄ g_{ij̄} + Σ g^{q̄p} ∂_k g_{iq̄} ∂_l̄ g_{pj̄}` with the
/// derivatives of the metric field taken by finite differences at `q`.
pub fn curvature_fd(t: f64, r2: f64, step: f64) -> Result<CurvatureTensor> {
    check_guard(t, r2)?;
    let chart = ChartMap::new(t, r2)?;
    let field = |x: &[f64]| -> [f64; 18] {
        let z = [C::new(x[0], x[1]), C::new(x[2], x[3]), C::new(x[4], x[5])];
        match metric_field(&chart, &z) {
            Ok(g) => {
                std::array::from_fn(|m| if m < 9 { g[(m / 3, m % 3)].re } else { g[((m - 9) / 3, (m - 9) % 3)].im })
            }
            Err(_) => [f64::NAN; 18],
        }
    };
    let unpack = |v: [f64; 18]| -> CMatrix3 { CMatrix3::from_fn(|i, j| C::new(v[i * 3 + j], v[9 + i * 3 + j])) };
    let x0 = [0.0; 6];
    let g = metric_field(&chart, &[ZERO; 3])?;
    let ginv = g.try_inverse().ok_or_else(|| Error::Verification("singular metric at q".into()))?;

    let dx: Vec<CMatrix3> = (0..6).map(|v| unpack(fd::gradient_entry(&field, &x0, v, step))).collect();
    let d_hol: Vec<CMatrix3> = (0..3).map(|k| (dx[2 * k] - dx[2 * k + 1] * I) * C::new(0.5, 0.0)).collect();
    let d_anti: Vec<CMatrix3> = (0..3).map(|l| (dx[2 * l] + dx[2 * l + 1] * I) * C::new(0.5, 0.0)).collect();
    let hess = |a: usize, b: usize| unpack(fd::hessian_entry(&field, &x0, a, b, step));
    let mut mixed = vec![CMatrix3::zeros(); 9];
    for k in 0..3 {
        for l in 0..3 {
            let (xk, yk, xl, yl) = (2 * k, 2 * k + 1, 2 * l, 2 * l + 1);
            mixed[k * 3 + l] = (hess(xk, xl) + hess(yk, yl) + (hess(xk, yl) - hess(yk, xl)) * I) * C::new(0.25, 0.0);
        }
    }
    let mut components = Vec::with_capacity(81);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut quad = ZERO;
                    for q in 0..3 {
                        for p in 0..3 {
                            quad += d_hol[k][(i, q)] * ginv[(q, p)] * d_anti[l][(p, j)];
                        }
                    }
                    components.push(-mixed[k * 3 + l][(i, j)] + quad);
                }
            }
        }
    }
    if components.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::Verification(format!("finite-difference stencil of step {step} leaves the chart")));
    }
    Ok(CurvatureTensor { t, r2, components })
}

/// Agreement of the assembled curvature with the finite-difference oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureComparison {
    pub t: f64,
    pub r2: f64,
    pub step: f64,
    /// Number of components with `|R| ≥ DOMINANT_FRACTION · max|R|`.
    pub dominant: usize,
    /// Largest relative error over dominant components.
    pub max_rel_err: f64,
    /// Largest error over all components relative to `max|R|`.
    pub max_scaled_err: f64,
    pub passes: bool,
}

pub fn curvature_fd_comparison(t: f64, r2: f64) -> Result<CurvatureComparison> {
    let exact = curvature_at_q(t, r2)?;
    let step = 5e-3 * ChartMap::new(t, r2)?.length_scale();
    let approx = curvature_fd(t, r2, step)?;
    let top = exact.max_abs();
    let mut dominant = 0;
    let mut max_rel_err: f64 = 0.0;
    let mut max_scaled_err: f64 = 0.0;
    for (a, b) in exact.components.iter().zip(&approx.components) {
        let err = (a - b).norm();
        max_scaled_err = max_scaled_err.max(err / top);
        if a.norm() >= DOMINANT_FRACTION * top {
            dominant += 1;
            max_rel_err = max_rel_err.max(err / a.norm());
        }
    }
    Ok(CurvatureComparison {
        t,
        r2,
        step,
        dominant,
        max_rel_err,
        max_scaled_err,
        passes: max_rel_err <= CURVATURE_FD_TOL,
    })
}

/// `−f′(r²)_{13̄13̄} + (f′)²(r²)_{111̄}(r²)_{3̄3̄1}` from the closed-form table, and its
/// simplified value `−2r²/(η(r²+t))`.
pub fn mixed_term_identity(t: f64, r2: f64) -> Result<(C, f64)> {
    let table = printed_partials(t, r2)?;
    let f1 = radial::f_prime_jet(deformed(t)?, r2)?.value();
    let get = |h: &[usize], a: &[usize]| table.get(h, a).expect("entry within the table");
    let lhs = -get(&[0, 0], &[2, 2]) * f1 + get(&[0, 0], &[0]) * get(&[0], &[2, 2]) * (f1 * f1);
    let eta = ChartMap::new(t, r2)?.eta;
    Ok((lhs, -2.0 * r2 / (eta * (r2 + t))))
}

/// Curvature diagnostics at one sample point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRow {
    pub t: f64,
    pub r2: f64,
    /// `max|R| · r^{4/3}`.
    pub scaled_sup: f64,
    /// `max|Ric| · r^{4/3}`.
    pub ricci_scaled: f64,
    pub symmetry_defect: f64,
    /// Relative defect of the simplified `R_{13̄13̄}` cross terms.
    pub identity_defect: f64,
}

pub fn curvature_row(t: f64, r2: f64) -> Result<CurvatureRow> {
    let r = curvature_at_q(t, r2)?;
    let (lhs, rhs) = mixed_term_identity(t, r2)?;
    let scale = r2.powf(2.0 / 3.0);
    Ok(CurvatureRow {
        t,
        r2,
        scaled_sup: r.scaled_sup(),
        ricci_scaled: r.ricci_max() * scale,
        symmetry_defect: r.symmetry_defect(),
        identity_defect: (lhs - rhs).norm() / rhs.abs(),
    })
}

/// Curvature over a grid of `t` and `r²/t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureStudy {
    pub rows: Vec<CurvatureRow>,
    /// `(t, r²)` pairs inside the tip guard, skipped.
    pub rejected: Vec<(f64, f64)>,
    /// `Ĉ = sup max|R| · r^{4/3}` over the accepted points.
    pub c_hat: f64,
    pub max_ricci_scaled: f64,
    pub max_symmetry_defect: f64,
    pub max_identity_defect: f64,
}

pub fn curvature_study(t_list: &[f64], ratios: &[f64]) -> Result<CurvatureStudy> {
    if t_list.is_empty() || ratios.is_empty() {
        return domain("curvature study needs a nonempty grid");
    }
    let points: Vec<(f64, f64)> = t_list.iter().flat_map(|&t| ratios.iter().map(move |&x| (t, t * x))).collect();
    let (ok, rejected): (Vec<_>, Vec<_>) = points.into_iter().partition(|&(t, r2)| check_guard(t, r2).is_ok());
    let rows = ok.par_iter().map(|&(t, r2)| curvature_row(t, r2)).collect::<Result<Vec<_>>>()?;
    let max = |f: fn(&CurvatureRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(CurvatureStudy {
        c_hat: max(|r| r.scaled_sup),
        max_ricci_scaled: max(|r| r.ricci_scaled),
        max_symmetry_defect: max(|r| r.symmetry_defect),
        max_identity_defect: max(|r| r.identity_defect),
        rows,
        rejected,
    })
}

/// `k` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![lo],
        _ => (0..k).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (k - 1) as f64).exp()).collect(),
    }
}

/// Volume and gradient-norm comparison of `ω_{co,t}` with the Euclidean `ω_e = i∂∂̄r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeGradient {
    pub t: f64,
    pub r2: f64,
    /// `det g_co / det g_e`.
    pub vol_ratio: f64,
    /// `vol_ratio · r²`, equal to `2/3`.
    pub vol_ratio_r2: f64,
    /// Smallest `C` with `|∇f|²_e ≤ C r^{−2/3} |∇f|²_co`.
    pub grad_const: f64,
}

/// `max((η³/r⁴)^{1/3}, (2/3)(η³/r⁴)^{−2/3})`, the value of the gradient constant at `q`.
pub fn grad_const_closed_form(t: f64, r2: f64) -> Result<f64> {
    let h = radial::eta(deformed(t)?, r2)?.powi(3) / (r2 * r2);
    Ok(h.cbrt().max(2.0 / 3.0 * h.powf(-2.0 / 3.0)))
}

pub fn volume_and_gradient_comparison(t: f64, r2: f64) -> Result<VolumeGradient> {
    let chart = ChartMap::new(t, r2)?;
    let jet = chart.jet(&[ZERO; 3])?;
    let g_co = metric_field(&chart, &[ZERO; 3])?;
    let g_e = CMatrix3::from_fn(|i, j| jet.partial(&[i], &[j]).expect("indices in range"));
    let vol_ratio = (g_co.determinant() / g_e.determinant()).re;
    let vol_ratio_r2 = vol_ratio * r2;
    if !((vol_ratio_r2 - 2.0 / 3.0).abs() <= 1e-10 * (2.0 / 3.0)) {
        return Err(Error::Verification(format!("vol_co/vol_e · r² = {vol_ratio_r2} at t = {t}, r² = {r2}")));
    }
    let l = g_e.cholesky().ok_or_else(|| Error::Verification("Euclidean metric not positive definite".into()))?.l();
    let linv = l.try_inverse().ok_or_else(|| Error::Verification("singular Cholesky factor".into()))?;
    let m = linv * g_co * linv.adjoint();
    let m = (m + m.adjoint()) * C::new(0.5, 0.0);
    let top = m.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(VolumeGradient { t, r2, vol_ratio, vol_ratio_r2, grad_const: top * r2.cbrt() })
}

/// Eigenvalues of the induced metric on `{r² = t(1 + ε)}` at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S3Row {
    pub eps: f64,
    /// Ascending eigenvalues against the round metric of unit radius scaled by `2/t`.
    pub eigenvalues: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S3Limit {
    pub t: f64,
    pub rows: Vec<S3Row>,
    /// Each eigenvalue branch extrapolated to `ε = 0`.
    pub extrapolated: [f64; 5],
    /// Mean of the extrapolated eigenvalues.
    pub limit: f64,
    /// `(1/2)(2t²/3)^{1/3}`.
    pub expected: f64,
    /// Largest relative deviation of an extrapolated eigenvalue from `expected`.
    pub rel_err: f64,
}

fn s3_row(t: f64, eps: f64) -> Result<S3Row> {
    let chart = ChartMap::new(t, t * (1.0 + eps))?;
    let jet = chart.jet(&[ZERO; 3])?;
    let g_co = metric_field(&chart, &[ZERO; 3])?;
    let g_e = CMatrix3::from_fn(|i, j| jet.partial(&[i], &[j]).expect("indices in range"));
    let d2 = jet.partial(&[1], &[])?;
    let e = |i: usize, c: C| {
        let mut v = [ZERO; 3];
        v[i] = c;
        v
    };
    let dirs = [e(0, C::new(1.0, 0.0)), e(0, I), e(2, C::new(1.0, 0.0)), e(2, I), e(1, I * d2.conj() / d2.norm())];
    let gram = |g: &CMatrix3| {
        Matrix5::from_fn(|a, b| {
            let mut s = ZERO;
            for i in 0..3 {
                for j in 0..3 {
                    s += g[(i, j)] * dirs[a][i] * dirs[b][j].conj();
                }
            }
            s.re
        })
    };
    let (gc, ge) = (gram(&g_co), gram(&g_e));
    let l = ge.cholesky().ok_or_else(|| Error::Verification("tangent Gram matrix not positive".into()))?.l();
    let linv = l.try_inverse().ok_or_else(|| Error::Verification("singular Cholesky factor".into()))?;
    let m = linv * gc * linv.transpose();
    let mut ev: Vec<f64> =
        SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues.iter().map(|x| 0.5 * t * x).collect();
    ev.sort_by(f64::total_cmp);
    Ok(S3Row { eps, eigenvalues: std::array::from_fn(|k| ev[k]) })
}

/// The metric induced on `{r² = t(1 + ε)}` at `q`, restricted to the five real
/// directions tangent to the level set, as `ε → 0`.
pub fn s3_limit(t: f64, eps_list: &[f64]) -> Result<S3Limit> {
    deformed(t)?;
    if eps_list.is_empty() {
        return domain("S³ limit needs at least one ε");
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return domain("ε values must lie in (0, 1)");
    }
    for (k, a) in eps_list.iter().enumerate() {
        if eps_list[..k].contains(a) {
            return domain("ε values must be distinct");
        }
    }
    let rows = eps_list.iter().map(|&e| s3_row(t, e)).collect::<Result<Vec<_>>>()?;
    let extrapolated: [f64; 5] = std::array::from_fn(|k| {
        let ys: Vec<f64> = rows.iter().map(|r| r.eigenvalues[k]).collect();
        fd::extrapolate_to_zero(eps_list, &ys)
    });
    let expected = 0.5 * (2.0 * t * t / 3.0).cbrt();
    let limit = extrapolated.iter().sum::<f64>() / 5.0;
    let rel_err = extrapolated.iter().map(|x| (x - expected).abs() / expected).fold(0.0, f64::max);
    Ok(S3Limit { t, rows, extrapolated, limit, expected, rel_err })
}

/// Default `ε` ladder for [`s3_limit`].
pub fn default_eps_list() -> Vec<f64> {
    vec![0.08, 0.04, 0.02, 0.01, 0.005]
}
