use conifold_core::deformed::{
    curvature_fd_comparison, curvature_study, grad_const_closed_form, log_grid, metric_at_q, s3_limit,
    volume_and_gradient_comparison, CurvatureStudy,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{Outcome, ReportDocument, Runner};
use crate::{config_echo, num, write_csv, CliError};

const BOUND: &str = "|Rm(ω_co,t)| ≤ Ĉ r^(−4/3) on the deformed conifold with Ĉ independent of t";
const DRIFT: &str = "the curvature constant Ĉ is stable when the grid extends in t and r²/t";
const RICCI: &str = "the Candelas–de la Ossa metric is Ricci-flat: |Ric| r^(4/3) vanishes";
const SYMMETRY: &str = "Kähler symmetries R_ij̄kl̄ = R_kj̄il̄ = R_il̄kj̄ and conj(R_ij̄kl̄) = R_jīlk̄";
const IDENTITY: &str = "the simplified cross terms of R_13̄13̄ equal their unsimplified form";
const ORACLE: &str = "curvature from closed-form partials of r² agrees with finite differences of the metric field";
const METRIC: &str = "at the base point q the metric g_co is the identity in the adapted coordinates";
const VOLUME: &str = "det g_co / det g_e = 2/(3r²)";
const GRADIENT: &str =
    "|∇f|²_e ≤ C r^(−2/3) |∇f|²_co with C = max(h^(1/3), (2/3)h^(−2/3)) ∈ [(2/3)^(1/3), 1], h = η³/r⁴";
const S3: &str =
    "as r² → t the metric on the vanishing sphere tends to the round metric with eigenvalue (1/2)(2t²/3)^(1/3)";

fn sorted_union(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn study_json(s: &CurvatureStudy) -> serde_json::Value {
    json!({
        "points": s.rows.len(),
        "rejected": s.rejected,
        "c_hat": s.c_hat,
        "max_ricci_scaled": s.max_ricci_scaled,
        "max_symmetry_defect": s.max_symmetry_defect,
        "max_identity_defect": s.max_identity_defect,
    })
}

pub fn run(config: &RunConfig) -> Result<ReportDocument, CliError> {
    let k = &config.curvature;
    let mut runner = Runner::new(config.timings);
    let mut artifacts = Vec::new();

    let t_list = sorted_union(k.t_list.clone());
    let ratios = sorted_union([log_grid(k.ratio_min, k.ratio_max, k.ratio_steps), k.extra_ratios.clone()].concat());
    let f = k.extension_factor;
    let wide_t = sorted_union([t_list.clone(), vec![t_list[0] / f, t_list[t_list.len() - 1] * f]].concat());
    let decades = |a: f64, b: f64| (b / a).ln();
    let wide_steps = (k.ratio_steps as f64 * decades(k.ratio_min, k.ratio_max * f) / decades(k.ratio_min, k.ratio_max))
        .ceil() as usize;
    let wide_ratios =
        sorted_union([log_grid(k.ratio_min, k.ratio_max * f, wide_steps), k.extra_ratios.clone()].concat());

    let inputs =
        json!({"t_list": t_list, "ratio_min": k.ratio_min, "ratio_max": k.ratio_max, "ratio_points": ratios.len()});
    let base = runner.compute("curvature.bound", BOUND, inputs.clone(), || curvature_study(&t_list, &ratios))?;
    let Some(base) = base else {
        return Ok(ReportDocument::new("curvature", runner.into_checks(), artifacts, config_echo(config)));
    };
    runner.check("curvature.bound", BOUND, inputs.clone(), None, || {
        Ok(Outcome::new(!base.rows.is_empty() && base.c_hat.is_finite(), study_json(&base)))
    })?;

    let wide_inputs = json!({"t_list": wide_t, "ratio_max": k.ratio_max * f, "ratio_points": wide_ratios.len()});
    let tol = config.tol(k.c_hat_drift_tol);
    runner.check("curvature.bound_extension", DRIFT, wide_inputs, Some(tol), || {
        let wide = curvature_study(&wide_t, &wide_ratios)?;
        let drift = (wide.c_hat - base.c_hat).abs() / base.c_hat;
        Ok(Outcome::new(drift < tol, json!({"c_hat": base.c_hat, "extended_c_hat": wide.c_hat, "relative_drift": drift, "extended": study_json(&wide)})))
    })?;

    for (id, reference, tol, value) in [
        ("curvature.ricci", RICCI, config.tol(k.ricci_tol), base.max_ricci_scaled),
        ("curvature.symmetries", SYMMETRY, config.tol(k.symmetry_tol), base.max_symmetry_defect),
        ("curvature.cross_term_identity", IDENTITY, config.tol(k.identity_tol), base.max_identity_defect),
    ] {
        runner
            .check(id, reference, inputs.clone(), Some(tol), || Ok(Outcome::new(value < tol, json!({"max": value}))))?;
    }

    let tol = config.tol(k.fd_tol);
    for &[t, x] in &k.fd_points {
        runner.check(
            &format!("curvature.fd_oracle.t={t:e}.ratio={x:e}"),
            ORACLE,
            json!({"t": t, "r2": t * x}),
            Some(tol),
            || {
                let c = curvature_fd_comparison(t, t * x)?;
                Ok(Outcome::new(c.max_rel_err < tol, serde_json::to_value(c).unwrap_or_default()))
            },
        )?;
    }

    let points: Vec<(f64, f64)> = base.rows.iter().map(|r| (r.t, r.r2)).collect();
    let tol = config.tol(k.metric_tol);
    runner.check("curvature.metric_identity", METRIC, inputs.clone(), Some(tol), || {
        let d = points
            .par_iter()
            .map(|&(t, r2)| Ok(metric_at_q(t, r2)?.identity_defect))
            .collect::<conifold_core::Result<Vec<f64>>>()?;
        let worst = d.into_iter().fold(0.0, f64::max);
        Ok(Outcome::new(worst < tol, json!({"max_defect": worst})))
    })?;

    let volumes = points
        .par_iter()
        .map(|&(t, r2)| Ok((volume_and_gradient_comparison(t, r2)?, grad_const_closed_form(t, r2)?)))
        .collect::<conifold_core::Result<Vec<_>>>();
    let tol = config.tol(k.volume_tol);
    let grad_tol = config.tol(k.grad_tol);
    match volumes {
        Ok(volumes) => {
            runner.check("curvature.volume_ratio", VOLUME, inputs.clone(), Some(tol), || {
                let worst = volumes.iter().map(|(v, _)| (v.vol_ratio_r2 - 2.0 / 3.0).abs()).fold(0.0, f64::max);
                Ok(Outcome::new(worst < tol, json!({"max_error": worst})))
            })?;
            runner.check("curvature.gradient_constant", GRADIENT, inputs.clone(), Some(grad_tol), || {
                let lo = volumes.iter().map(|(v, _)| v.grad_const).fold(f64::INFINITY, f64::min);
                let hi = volumes.iter().map(|(v, _)| v.grad_const).fold(0.0, f64::max);
                let err = volumes.iter().map(|(v, c)| (v.grad_const - c).abs()).fold(0.0, f64::max);
                let floor = (2.0f64 / 3.0).cbrt();
                let pass = err < grad_tol && lo >= floor - grad_tol && hi <= 1.0 + grad_tol;
                Ok(Outcome::new(pass, json!({"min": lo, "max": hi, "closed_form_error": err})))
            })?;
        }
        Err(e) => {
            runner.check("curvature.volume_ratio", VOLUME, inputs.clone(), Some(tol), || Err(e))?;
        }
    }

    let tol = config.tol(k.s3_tol);
    for &t in &k.s3_t_list {
        runner.check(
            &format!("curvature.s3_limit.t={t:e}"),
            S3,
            json!({"t": t, "eps_list": k.s3_eps_list}),
            Some(tol),
            || {
                let s = s3_limit(t, &k.s3_eps_list)?;
                Ok(Outcome::new(s.rel_err < tol, serde_json::to_value(s).unwrap_or_default()))
            },
        )?;
    }

    let header = ["t", "r2", "ratio", "scaled_sup", "ricci_scaled", "symmetry_defect", "identity_defect"];
    let table: Vec<Vec<String>> = base
        .rows
        .iter()
        .map(|r| {
            [r.t, r.r2, r.r2 / r.t, r.scaled_sup, r.ricci_scaled, r.symmetry_defect, r.identity_defect]
                .map(num)
                .to_vec()
        })
        .collect();
    write_csv(&config.out_dir.join("curvature.csv"), &header, &table)?;
    artifacts.push("curvature.csv".into());
    Ok(ReportDocument::new("curvature", runner.into_checks(), artifacts, config_echo(config)))
}
