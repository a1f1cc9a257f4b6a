use conifold_core::cutoff::{verify_chi_bounds, ChiSpec};
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{Outcome, ReportDocument, Runner};
use crate::{config_echo, CliError};

const ITEMS: &str = "cutoff χ: χ(s) = s on [0, c₁], χ′ ≥ −Ĉ₁n^(−11/3) and 2χ′ + sχ″ ≥ −Ĉ₁n^(−11/3) on [c₁, c₃], \
                     the same with n^(−5/3) on [c₃, c₄], χ constant beyond c₄";
const PER_N: &str = "cutoff χ at one n: minima of χ′ and 2χ′ + sχ″ on [c₁, c₃] and [c₃, c₄]";
const VARIATION: &str = "the fitted constant Ĉ₁ is bounded independently of n";
const LAW: &str = "2χ′ + sχ″ = 0 on [c₂, c₃]";
const SIGNS: &str = "patch coefficients a₂ < 0 < a₃ with |a₂| n^(10/3) and a₃ n^(11/3) bounded";

pub fn run(config: &RunConfig) -> Result<ReportDocument, CliError> {
    let c = &config.cutoff;
    let mut runner = Runner::new(config.timings);
    let inputs = json!({"n_list": c.n_list});

    let report = runner.compute("cutoff.items", ITEMS, inputs.clone(), || verify_chi_bounds(&c.n_list))?;
    if let Some(report) = report {
        runner.check("cutoff.items", ITEMS, inputs.clone(), None, || {
            Ok(Outcome::new(report.items_hold, json!({"items_hold": report.items_hold, "c1_hat": report.c1_hat})))
        })?;
        for row in &report.rows {
            runner.check(&format!("cutoff.minima.n={}", row.n), PER_N, json!({"n": row.n}), None, || {
                let pass = row.identity_on_first_segment && row.constant_tail && row.coefficient_signs;
                Ok(Outcome::new(pass, serde_json::to_value(row).unwrap_or_default()))
            })?;
        }
        let tol = config.tol(c.c1_variation_tol);
        runner.check("cutoff.c1_variation", VARIATION, inputs.clone(), Some(tol), || {
            let v = report.c1_hat_variation;
            Ok(Outcome::new(v < tol, json!({"c1_hat": report.c1_hat, "relative_variation": v})))
        })?;
    }

    let tol = config.tol(c.law_tol);
    runner.check("cutoff.law_middle", LAW, json!({"n_list": c.n_list, "samples": c.law_samples}), Some(tol), || {
        let mut worst: f64 = 0.0;
        for &n in &c.n_list {
            let chi = ChiSpec::new(n)?;
            for i in 0..c.law_samples {
                let u = i as f64 / (c.law_samples - 1) as f64;
                let s = (chi.c2 * (chi.c3 / chi.c2).powf(u)).clamp(chi.c2, chi.c3);
                let scale = 2.0 * chi.eval(s, 1).abs() + (s * chi.eval(s, 2)).abs();
                worst = worst.max(chi.law(s).abs() / scale);
            }
        }
        Ok(Outcome::new(worst < tol, json!({"max_relative_defect": worst})))
    })?;

    runner.check("cutoff.coefficient_signs", SIGNS, inputs, None, || {
        let mut rows = Vec::new();
        let mut pass = true;
        for &n in &c.n_list {
            let chi = ChiSpec::new(n)?;
            let nf = n as f64;
            pass &= chi.a2 < 0.0 && chi.a3 > 0.0;
            rows.push(json!({
                "n": n,
                "a2": chi.a2,
                "a3": chi.a3,
                "a2_scaled": chi.a2.abs() * nf.powf(10.0 / 3.0),
                "a3_scaled": chi.a3 * nf.powf(11.0 / 3.0),
            }));
        }
        Ok(Outcome::new(pass, json!({"rows": rows})))
    })?;

    Ok(ReportDocument::new("cutoff", runner.into_checks(), vec![], config_echo(config)))
}
