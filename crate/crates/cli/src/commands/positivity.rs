use conifold_core::cutoff::SmoothStep;
use conifold_core::frame::{form_square_root, random_positive_form};
use conifold_core::resolved::{
    alpha_matrix, alpha_rhs, base_forms, h1_term_expansion, phi_form_with, positivity_search, ResolvedPoint, ScenarioH,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{Outcome, ReportDocument, Runner};
use crate::{config_echo, CliError};

const SEARCH: &str = "there is C₀ such that for n ≥ n(C₀) the correction form Ω₀ is positive on the annulus \
                      1/n ≤ r ≤ 2/n (all leading minors of [e_ij] positive) and outside it";
const C0_LIMIT: &str = "the smallest admissible C₀ is finite and below the configured limit";
const MINORS: &str = "leading minors of [e_ij] at C₀*(n) are positive over the annulus grid";
const FRONTIER: &str = "C₀*(n) is nonincreasing in n";
const C2: &str = "n^(2/3)Φ ≥ −2Ĉ₂ n^(−1) Σ_{k≠j} λ_kk̄ ∧ λ_jj̄ outside U(2/n) with Ĉ₂ independent of n";
const PHI: &str = "χ = id gives Φ = ω_co,0² coefficient-wise";
const ORACLE: &str =
    "the h₁ term of Ω₀ assembled from the coefficient block (c, d, α) equals its direct wedge expansion";
const ROOT: &str = "a positive (2,2)-form has a unique positive (1,1)-form square root";

fn oracle_points(n: u32, count: usize) -> Result<Vec<ResolvedPoint>, CliError> {
    (0..count)
        .map(|k| {
            let k = k as f64;
            let frac = 1.0 + (0.618_033_988_75 * k).fract();
            let z = Complex64::from_polar(2.0 * (0.414_213_562_37 * k).fract(), 0.7 * k);
            ResolvedPoint::from_polar(z, frac / n as f64, 0.07 * k, 0.3 * k, 1.1 * k)
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

pub fn run(config: &RunConfig) -> Result<ReportDocument, CliError> {
    let q = &config.positivity;
    let mut runner = Runner::new(config.timings);
    let scenario = q.scenario.build(config.seed)?;
    let mut artifacts = Vec::new();

    let inputs = json!({"n_list": q.n_list, "n_candidates": q.n_candidates, "grid": q.grid, "search": q.search});
    let search = runner.compute("positivity.search", SEARCH, inputs.clone(), || {
        positivity_search(&scenario, &q.n_list, &q.n_candidates, &q.grid, &q.search)
    })?;
    if let Some(search) = search {
        let c0_limit = config.tol(q.c0_limit);
        runner.check("positivity.search", SEARCH, inputs.clone(), None, || {
            Ok(Outcome::new(search.n_of_c0.is_some(), json!({"c0_star": search.c0_star, "n_of_c0": search.n_of_c0})))
        })?;
        runner.check("positivity.c0_limit", C0_LIMIT, json!({"c0_limit": c0_limit}), Some(c0_limit), || {
            Ok(Outcome::new(search.c0_star < c0_limit, json!({"c0_star": search.c0_star})))
        })?;
        for row in &search.rows {
            runner.check(
                &format!("positivity.minors.n={}", row.n),
                MINORS,
                json!({"n": row.n, "grid_points": row.grid_points}),
                None,
                || {
                    let pass = row.min_minors.iter().chain(&row.min_intrinsic_minors).all(|&m| m > 0.0);
                    Ok(Outcome::new(
                        pass,
                        json!({
                            "c0_star": row.c0_star,
                            "min_minors": row.min_minors,
                            "min_intrinsic_minors": row.min_intrinsic_minors,
                            "omega0_min_eigenvalue": row.omega0_min_eigenvalue,
                            "c3": row.c3,
                            "outer": row.outer,
                        }),
                    ))
                },
            )?;
        }
        runner.check("positivity.frontier_monotone", FRONTIER, json!({"n_list": q.n_list}), None, || {
            let frontier: Vec<_> = search.rows.iter().map(|r| json!({"n": r.n, "c0_star": r.c0_star})).collect();
            Ok(Outcome::new(search.c0_nonincreasing, json!({"frontier": frontier})))
        })?;
        let tol = config.tol(q.c2_variation_tol);
        runner.check(
            "positivity.c2_stability",
            C2,
            json!({"n_list": q.n_list, "samples": q.search.c2_samples}),
            Some(tol),
            || {
                let values: Vec<f64> = search.rows.iter().map(|r| r.c2.c2_hat).collect();
                let hi = values.iter().copied().fold(0.0, f64::max);
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let variation = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
                Ok(Outcome::new(variation < tol, json!({"c2_hat": values, "relative_variation": variation})))
            },
        )?;
        let path = config.out_dir.join("positivity_frontier.json");
        let mut text = serde_json::to_string_pretty(&search).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        artifacts.push("positivity_frontier.json".to_string());
    }

    let tol = config.tol(q.phi_tol);
    runner.check("positivity.phi_identity", PHI, json!({"n": q.oracle_n}), Some(tol), || {
        let mut worst: f64 = 0.0;
        for p in oracle_points(q.oracle_n, q.oracle_points).map_err(|e| conifold_core::Error::Domain(e.to_string()))? {
            for scale in [1.0, 0.1, 0.01] {
                let p = p.scaled(scale)?;
                let w = base_forms(&p)?.omega_co0;
                let square = w.wedge(&w)?;
                let phi = phi_form_with(q.oracle_n as f64, 1.0, 0.0, &p)?;
                worst = worst.max(phi.max_abs_diff(&square) / square.max_abs());
            }
        }
        Ok(Outcome::new(worst < tol, json!({"max_relative_difference": worst})))
    })?;

    let (tol, fail_tol) = (config.tol(q.oracle_tol), config.tol(q.oracle_fail_tol));
    let points = oracle_points(q.oracle_n, q.oracle_points)?;
    let scenarios: Vec<(String, ScenarioH)> = std::iter::once(("configured".to_string(), scenario.clone()))
        .chain((1..=q.oracle_random_scenarios as u64).map(|k| {
            let seed = config.seed.wrapping_add(k);
            (format!("random seed {seed}"), ScenarioH::random(seed))
        }))
        .collect();
    let inputs = json!({"n": q.oracle_n, "points": points.len(), "scenarios": scenarios.iter().map(|s| &s.0).collect::<Vec<_>>(), "fail_tol": fail_tol});
    runner.check("positivity.oracle", ORACLE, inputs, Some(tol), || {
        let sigma = SmoothStep::sigma();
        let mut worst: f64 = 0.0;
        let mut mismatches = Vec::new();
        for (name, s) in &scenarios {
            for (pi, p) in points.iter().enumerate() {
                let direct = h1_term_expansion(s, q.oracle_n, &sigma, p)?;
                let assembled = alpha_rhs(&alpha_matrix(s, q.oracle_n, &sigma, p)?, q.oracle_n);
                let scale = direct.max_abs().max(f64::MIN_POSITIVE);
                for i in 0..3 {
                    for j in 0..3 {
                        let (a, b) = (direct.e[(i, j)], assembled.e[(i, j)]);
                        let rel = (a - b).norm() / scale;
                        worst = worst.max(rel);
                        if rel > tol {
                            mismatches.push(json!({
                                "scenario": name,
                                "point": pi,
                                "entry": [i, j],
                                "direct": [a.re, a.im],
                                "assembled": [b.re, b.im],
                                "relative_difference": rel,
                            }));
                        }
                    }
                }
            }
        }
        Ok(Outcome::new(worst <= fail_tol, json!({"max_relative_difference": worst, "mismatches": mismatches})))
    })?;

    let tol = config.tol(q.square_root_tol);
    let inputs = json!({"forms": q.square_root_forms, "seed": config.seed});
    runner.check("positivity.square_root", ROOT, inputs, Some(tol), || {
        let errs = (0..q.square_root_forms as u64)
            .into_par_iter()
            .map(|k| {
                let w = random_positive_form(config.seed.wrapping_mul(1_000_003).wrapping_add(k));
                Ok(form_square_root(&w.wedge(&w)?)?.max_abs_diff(&w) / w.max_abs())
            })
            .collect::<conifold_core::Result<Vec<f64>>>()?;
        let worst = errs.into_iter().fold(0.0, f64::max);
        Ok(Outcome::new(worst < tol, json!({"max_coefficient_difference": worst})))
    })?;

    Ok(ReportDocument::new("positivity", runner.into_checks(), artifacts, config_echo(config)))
}
