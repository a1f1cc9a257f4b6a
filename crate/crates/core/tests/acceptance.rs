use std::process::ExitCode;
use std::time::{Duration, Instant};

use conifold_core::cutoff::{verify_chi_bounds, ChiSpec, SmoothStep};
use conifold_core::deformed::{
    curvature_fd_comparison, curvature_study, default_eps_list, log_grid, metric_at_q, s3_limit,
    volume_and_gradient_comparison,
};
use conifold_core::frame::{form_square_root, random_positive_form};
use conifold_core::numerics::fd;
use conifold_core::radial::{
    self, convergence_table, monotonicity_witness, ode_residual, ratio_bounds, tau, ProfileKind,
};
use conifold_core::resolved::{
    alpha_matrix, alpha_rhs, base_forms, default_n_candidates, h1_term_expansion, phi_form_with, positivity_search,
    AnnulusGrid, ResolvedPoint, ScenarioH, SearchOptions,
};
use conifold_core::Result;
use num_complex::Complex64;

type Criterion = fn() -> Result<Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// 20 values of `t` in `[1e-3, 1]` times 10 ratios `r²/t` in `[1.001, 1e3]`.
fn sample_grid() -> Vec<(f64, f64)> {
    let ts = log_grid(1e-3, 1.0, 20);
    let ratios = log_grid(1.001, 1e3, 10);
    ts.iter().flat_map(|&t| ratios.iter().map(move |&x| (t, t * x))).collect()
}

fn criterion_1() -> Result<Outcome> {
    let grid = sample_grid();
    let (mut analytic, mut numeric) = (0.0f64, 0.0f64);
    for &(t, s) in &grid {
        let kind = ProfileKind::deformed(t)?;
        analytic = analytic.max(ode_residual(kind, s)?);
        let e3 = |x: f64| radial::eta(kind, x).map(|e| e.powi(3)).unwrap_or(f64::NAN);
        let h = 1e-4 * (s - t).min(s);
        let de3 = fd::derivative(e3, s, h);
        let lhs = s * (s - t) * (s + t) * de3 + 3.0 * t * t * e3(s);
        numeric = numeric.max((lhs - 2.0 * s.powi(4)).abs() / (2.0 * s.powi(4)));
    }
    outcome(
        grid.len() == 200 && analytic < 1e-9 && numeric < 1e-6,
        format!("{} samples, analytic residual {analytic:.2e}, finite-difference residual {numeric:.2e}", grid.len()),
    )
}

fn criterion_2() -> Result<Outcome> {
    let grid = log_grid(1e-3, 20.0, 1000);
    let w = monotonicity_witness(1.0, &grid)?;
    let lo = (tau::h(1e-3) - 2.0 / 3.0).abs();
    let hi = (tau::h(20.0) - 1.0).abs();
    outcome(
        w.h_increasing && lo < 1e-5 && hi < 1e-8,
        format!("increasing {}, |h(1e-3) - 2/3| = {lo:.2e}, |h(20) - 1| = {hi:.2e}", w.h_increasing),
    )
}

fn criterion_3() -> Result<Outcome> {
    let n_list = [50, 100, 500, 1000];
    let report = verify_chi_bounds(&n_list)?;
    let mut law: f64 = 0.0;
    let mut signs = true;
    for &n in &n_list {
        let chi = ChiSpec::new(n)?;
        for i in 0..=2000 {
            let s = chi.c2 * (chi.c3 / chi.c2).powf(i as f64 / 2000.0);
            let s = s.clamp(chi.c2, chi.c3);
            let scale = 2.0 * chi.eval(s, 1).abs() + (s * chi.eval(s, 2)).abs();
            law = law.max(chi.law(s).abs() / scale);
        }
        signs &= chi.a2 < 0.0 && chi.a3 > 0.0;
    }
    let rows_ok = report.rows.iter().all(|r| r.coefficient_signs && r.identity_on_first_segment && r.constant_tail);
    outcome(
        report.items_hold && rows_ok && signs && report.c1_hat_variation < 0.2 && law < 1e-12,
        format!(
            "items hold {}, C1 = {:.4e} varying {:.2}%, max relative |2chi' + s chi''| on [c2, c3] {law:.2e}, a2 < 0 < a3 {signs}",
            report.items_hold,
            report.c1_hat,
            100.0 * report.c1_hat_variation
        ),
    )
}

fn criterion_4() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (t, r2) in sample_grid() {
        worst = worst.max(metric_at_q(t, r2)?.identity_defect);
    }
    outcome(worst < 1e-10, format!("max |g(q) - I| = {worst:.2e}"))
}

fn criterion_5() -> Result<Outcome> {
    let base = curvature_study(&log_grid(1e-3, 1.0, 7), &log_grid(1.001, 1e3, 40))?;
    let wide = curvature_study(&log_grid(1e-4, 10.0, 11), &log_grid(1.001, 1e4, 53))?;
    let drift = (wide.c_hat - base.c_hat).abs() / base.c_hat;
    let mut fd_err: f64 = 0.0;
    let mut fd_ok = true;
    for (t, x) in [(1.0, 2.0), (1.0, 1.001), (1e-3, 1e3), (1e-2, 50.0), (0.1, 1.3), (0.5, 8.0)] {
        let c = curvature_fd_comparison(t, t * x)?;
        fd_err = fd_err.max(c.max_rel_err);
        fd_ok &= c.passes;
    }
    let ricci = base.max_ricci_scaled.max(wide.max_ricci_scaled);
    let sym = base.max_symmetry_defect.max(wide.max_symmetry_defect);
    outcome(
        base.c_hat.is_finite()
            && base.rejected.is_empty()
            && drift < 0.1
            && ricci < 1e-8
            && sym < 1e-10
            && fd_ok
            && fd_err < 1e-3,
        format!(
            "C = {:.6} ({} points), extended C = {:.6} ({} points), drift {:.3}%, Ricci r^(4/3) {ricci:.2e}, symmetry {sym:.2e}, finite-difference {fd_err:.2e}",
            base.c_hat,
            base.rows.len(),
            wide.c_hat,
            wide.rows.len(),
            100.0 * drift
        ),
    )
}

fn criterion_6() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (t, r2) in sample_grid() {
        let v = volume_and_gradient_comparison(t, r2)?;
        worst = worst.max((v.vol_ratio_r2 - 2.0 / 3.0).abs());
    }
    outcome(worst < 1e-10, format!("max |vol_ratio r^2 - 2/3| = {worst:.2e}"))
}

fn criterion_7() -> Result<Outcome> {
    let ts = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 0..3 {
        let table = convergence_table(k, 0.25, &ts, 2001)?;
        pass &= table.strictly_decreasing;
        let last = table.rows.last().map(|r| r.sup_error).unwrap_or(f64::NAN);
        if k == 1 {
            pass &= last < 1e-2;
        }
        parts.push(format!("k = {k}: decreasing {}, error at 1e-4 {last:.2e}", table.strictly_decreasing));
    }
    let bands = ratio_bounds(0.05, 0.2, 1e-4, 1001)?;
    pass &= bands.holds;
    parts.push(format!(
        "ratio bands [{:.4}, {:.4}] and [{:.4}, {:.4}] hold {}",
        bands.first_ratio_min, bands.first_ratio_max, bands.second_ratio_min, bands.second_ratio_max, bands.holds
    ));
    outcome(pass, parts.join("; "))
}

fn annulus_points(n: u32) -> Result<Vec<ResolvedPoint>> {
    (0..20)
        .map(|k| {
            let k = k as f64;
            let z = Complex64::from_polar(0.1 * k, 0.7 * k);
            ResolvedPoint::from_polar(z, (1.0 + 0.05 * k) / n as f64, 0.07 * k, 0.3 * k, 1.1 * k)
        })
        .collect()
}

fn criterion_8() -> Result<Outcome> {
    let n = 100;
    let sigma = SmoothStep::sigma();
    let points = annulus_points(n)?;
    let scenarios = std::iter::once(ScenarioH::default()).chain((1..=5).map(ScenarioH::random));
    let mut worst: f64 = 0.0;
    let mut mismatches = Vec::new();
    for (si, s) in scenarios.enumerate() {
        for (pi, p) in points.iter().enumerate() {
            let direct = h1_term_expansion(&s, n, &sigma, p)?;
            let assembled = alpha_rhs(&alpha_matrix(&s, n, &sigma, p)?, n);
            let scale = direct.max_abs().max(f64::MIN_POSITIVE);
            for i in 0..3 {
                for j in 0..3 {
                    let rel = (direct.e[(i, j)] - assembled.e[(i, j)]).norm() / scale;
                    worst = worst.max(rel);
                    if rel >= 1e-8 {
                        mismatches.push(format!(
                            "scenario {si} point {pi} entry ({i}, {j}): direct {} assembled {}",
                            direct.e[(i, j)],
                            assembled.e[(i, j)]
                        ));
                    }
                }
            }
        }
    }
    for m in &mismatches {
        println!("    mismatch: {m}");
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "6 scenarios x {} points, max relative difference {worst:.2e}, {} mismatches",
            points.len(),
            mismatches.len()
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let grid = AnnulusGrid::default();
    let search = positivity_search(
        &ScenarioH::default(),
        &[100, 200, 400],
        &default_n_candidates(),
        &grid,
        &SearchOptions::default(),
    )?;
    let mut phi_err: f64 = 0.0;
    for (z, r) in
        [(Complex64::new(0.0, 0.0), 0.01), (Complex64::new(0.9, -0.3), 0.2), (Complex64::new(-1.5, 1.0), 0.05)]
    {
        let p = ResolvedPoint::from_polar(z, r, 1.1, 0.2, 2.9)?;
        let w = base_forms(&p)?.omega_co0;
        let square = w.wedge(&w)?;
        let phi = phi_form_with(100.0, 1.0, 0.0, &p)?;
        phi_err = phi_err.max(phi.max_abs_diff(&square) / square.max_abs());
    }
    let c2: Vec<f64> = search.rows.iter().map(|r| r.c2.c2_hat).collect();
    let (lo, hi) = c2.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let c2_variation = (hi - lo) / hi;
    let minors_ok = search.rows.iter().all(|r| r.min_minors.iter().all(|&m| m > 0.0));
    let per_n: Vec<String> = search.rows.iter().map(|r| format!("{}: {:.4}", r.n, r.c0_star)).collect();
    outcome(
        search.c0_star < 1e3
            && search.n_of_c0.is_some()
            && minors_ok
            && search.c0_nonincreasing
            && phi_err < 1e-12
            && c2_variation < 0.2,
        format!(
            "C0* = {:.4} (per n {}), n(C0*) = {:?}, nonincreasing {}, Phi(id) error {phi_err:.2e}, C2 {:?} varying {:.2}%",
            search.c0_star,
            per_n.join(", "),
            search.n_of_c0,
            search.c0_nonincreasing,
            c2,
            100.0 * c2_variation
        ),
    )
}

fn criterion_10() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let w = random_positive_form(seed);
        let root = form_square_root(&w.wedge(&w)?)?;
        worst = worst.max(root.max_abs_diff(&w));
    }
    outcome(worst < 1e-9, format!("100 forms, max coefficient difference {worst:.2e}"))
}

fn criterion_11() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for t in [0.1, 1.0] {
        let s = s3_limit(t, &default_eps_list())?;
        worst = worst.max(s.rel_err);
        parts.push(format!("t = {t}: {:.10} vs {:.10}", s.limit, s.expected));
    }
    outcome(worst < 1e-3, format!("{}, max relative error {worst:.2e}", parts.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(Criterion, Duration); 11] = [
        (criterion_1, Duration::from_secs(5)),
        (criterion_2, Duration::from_secs(1)),
        (criterion_3, Duration::from_secs(2)),
        (criterion_4, Duration::from_secs(2)),
        (criterion_5, Duration::from_secs(60)),
        (criterion_6, Duration::from_secs(1)),
        (criterion_7, Duration::from_secs(5)),
        (criterion_8, Duration::from_secs(5)),
        (criterion_9, Duration::from_secs(120)),
        (criterion_10, Duration::from_secs(2)),
        (criterion_11, Duration::from_secs(2)),
    ];
    let mut failures = 0;
    for (k, (run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {}: {} ({:.3} s of {} s) {detail}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
