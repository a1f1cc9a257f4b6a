use conifold_core::deformed::log_grid;
use conifold_core::numerics::fd;
use conifold_core::radial::{
    asymptotic_constants, convergence_table, derivatives, eta, monotonicity_witness, ratio_bounds, tau, ProfileEval,
    ProfileKind,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{Outcome, ReportDocument, Runner};
use crate::{config_echo, num, write_csv, CliError};

const ODE: &str = "Ricci-flatness ODE s(s² − t²)(η³)′ + 3t²η³ = 2s⁴ for η = s f′(s), s = r², with analytic \
                   derivatives f′..f⁗ each matched against a Richardson central difference of the one below";
const ODE_RESOLVED: &str = "resolved profile: η²(η + 3/2) = s² for η = s f′(s), s = r², with analytic derivatives \
                            f′..f⁗ each matched against a Richardson central difference of the one below";
const ODE_FD: &str = "Ricci-flatness ODE with (η³)′ taken from a Richardson central difference of η³";
const MONOTONE: &str = "h(τ) = η³/r⁴ is strictly increasing in τ and its derivative numerator h₁ is positive";
const LIMITS: &str = "h(τ) → 2/3 as τ → 0 and h(τ) → 1 as τ → ∞";
const CONVERGENCE: &str = "sup over [δ, 1] of |f_t^(k) − f_0^(k)| decreases to zero as t → 0";
const RATIOS: &str = "f_t′/f_0′ and f_t″/f_0″ stay inside their bands on [δ′, δ] for t below δ′";
const ASYMPTOTIC: &str = "scale-invariant bounds |f^(k+1)| r^β_k (1 − t/r²)^γ_k < ∞ and 0 < r^(2/3) η′ < 1";

fn fd_residual(t: f64, s: f64) -> conifold_core::Result<f64> {
    let kind = ProfileKind::deformed(t)?;
    let e3 = |x: f64| eta(kind, x).map(|e| e.powi(3)).unwrap_or(f64::NAN);
    let de3 = fd::derivative(e3, s, 1e-4 * (s - t).min(s));
    let lhs = s * (s - t) * (s + t) * de3 + 3.0 * t * t * e3(s);
    Ok((lhs - 2.0 * s.powi(4)).abs() / (2.0 * s.powi(4)))
}

fn max_residual(evals: &[ProfileEval]) -> f64 {
    evals.iter().map(|e| e.ode_residual).fold(0.0, f64::max)
}

pub fn run(config: &RunConfig) -> Result<ReportDocument, CliError> {
    let p = &config.profile;
    let mut runner = Runner::new(config.timings);
    let mut rows: Vec<ProfileEval> = Vec::new();
    let ode_tol = config.tol(p.ode_tol);
    let fd_tol = config.tol(p.ode_fd_tol);

    let r2s = log_grid(p.r2_min, p.r2_max, p.r2_steps);
    for kind in [ProfileKind::Cone, ProfileKind::Resolved] {
        let id = format!("profile.ode.{}", kind.label());
        let reference = if kind == ProfileKind::Resolved { ODE_RESOLVED } else { ODE };
        let inputs = json!({"r2_min": p.r2_min, "r2_max": p.r2_max, "points": r2s.len()});
        let evals = runner.compute(&id, reference, inputs.clone(), || {
            r2s.par_iter().map(|&s| derivatives(kind, s)).collect::<conifold_core::Result<Vec<_>>>()
        })?;
        if let Some(evals) = evals {
            let worst = max_residual(&evals);
            runner.check(&id, reference, inputs, Some(ode_tol), || {
                Ok(Outcome::new(worst < ode_tol, json!({"max_relative_residual": worst})))
            })?;
            rows.extend(evals);
        }
    }

    let ratios = log_grid(p.ratio_min, p.ratio_max, p.ratio_steps);
    for &t in &p.t_list {
        let id = format!("profile.ode.deformed.t={t:e}");
        let inputs = json!({"t": t, "ratio_min": p.ratio_min, "ratio_max": p.ratio_max, "points": ratios.len()});
        let kind = ProfileKind::deformed(t).map_err(|e| CliError::Config(e.to_string()))?;
        let evals = runner.compute(&id, ODE, inputs.clone(), || {
            ratios.par_iter().map(|&x| derivatives(kind, t * x)).collect::<conifold_core::Result<Vec<_>>>()
        })?;
        if let Some(evals) = evals {
            let worst = max_residual(&evals);
            runner.check(&id, ODE, inputs.clone(), Some(ode_tol), || {
                Ok(Outcome::new(worst < ode_tol, json!({"max_relative_residual": worst})))
            })?;
            rows.extend(evals);
        }
        runner.check(&format!("profile.ode_fd.deformed.t={t:e}"), ODE_FD, inputs, Some(fd_tol), || {
            let res = ratios.par_iter().map(|&x| fd_residual(t, t * x)).collect::<conifold_core::Result<Vec<_>>>()?;
            let worst = res.into_iter().fold(0.0, f64::max);
            Ok(Outcome::new(worst < fd_tol, json!({"max_relative_residual": worst})))
        })?;
    }

    let taus = log_grid(p.tau_min, p.tau_max, p.tau_steps);
    let inputs = json!({"tau_min": p.tau_min, "tau_max": p.tau_max, "points": taus.len()});
    runner.check("profile.h_monotone", MONOTONE, inputs.clone(), None, || {
        let w = monotonicity_witness(1.0, &taus)?;
        Ok(Outcome::new(w.holds(), json!({"h_increasing": w.h_increasing, "h1_positive": w.h1_positive})))
    })?;
    let (low_tol, high_tol) = (config.tol(p.h_low_tol), config.tol(p.h_high_tol));
    runner.check(
        "profile.h_limits",
        LIMITS,
        json!({"tau_min": p.tau_min, "tau_max": p.tau_max, "low_tol": low_tol, "high_tol": high_tol}),
        None,
        || {
            let low = (tau::h(p.tau_min) - 2.0 / 3.0).abs();
            let high = (tau::h(p.tau_max) - 1.0).abs();
            Ok(Outcome::new(low < low_tol && high < high_tol, json!({"low_error": low, "high_error": high})))
        },
    )?;

    let k1_tol = config.tol(p.convergence_k1_tol);
    for &k in &p.convergence_k {
        let inputs =
            json!({"k": k, "delta": p.convergence_delta, "t_list": p.convergence_t_list, "grid": p.convergence_grid});
        let tolerance = (k == 1).then_some(k1_tol);
        runner.check(&format!("profile.convergence.k={k}"), CONVERGENCE, inputs, tolerance, || {
            let table = convergence_table(k, p.convergence_delta, &p.convergence_t_list, p.convergence_grid)?;
            let last = table.rows.last().map_or(f64::NAN, |r| r.sup_error);
            let pass = table.strictly_decreasing && tolerance.is_none_or(|tol| last < tol);
            Ok(Outcome::new(pass, json!({"rows": table.rows, "strictly_decreasing": table.strictly_decreasing})))
        })?;
    }

    let inputs =
        json!({"delta_prime": p.ratio_delta_prime, "delta": p.ratio_delta, "t": p.ratio_t, "grid": p.ratio_grid});
    runner.check("profile.ratio_bands", RATIOS, inputs, None, || {
        let r = ratio_bounds(p.ratio_delta_prime, p.ratio_delta, p.ratio_t, p.ratio_grid)?;
        Ok(Outcome::new(r.holds, serde_json::to_value(&r).unwrap_or_default()))
    })?;

    let asymptotic_ratios: Vec<f64> = ratios.iter().copied().filter(|&x| 1.0 / x <= 1.0 - 1e-3).collect();
    for &t in &p.t_list {
        let inputs = json!({"t": t, "points": asymptotic_ratios.len()});
        runner.check(&format!("profile.asymptotic.t={t:e}"), ASYMPTOTIC, inputs, None, || {
            let r2s: Vec<f64> = asymptotic_ratios.iter().map(|&x| t * x).collect();
            let a = asymptotic_constants(t, &r2s)?;
            let pass = a.eta_prime_in_unit_interval() && a.sup.iter().all(|v| v.is_finite());
            Ok(Outcome::new(pass, serde_json::to_value(&a).unwrap_or_default()))
        })?;
    }

    let header = ["kind", "t", "r2", "eta", "f", "f1", "f2", "f3", "f4", "ode_residual"];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|e| {
            let mut r = vec![e.kind.label().to_string()];
            r.extend([e.kind.t(), e.r2, e.eta, e.f, e.f1, e.f2, e.f3, e.f4, e.ode_residual].map(num));
            r
        })
        .collect();
    write_csv(&config.out_dir.join("profile.csv"), &header, &table)?;
    Ok(ReportDocument::new("profile", runner.into_checks(), vec!["profile.csv".into()], config_echo(config)))
}
