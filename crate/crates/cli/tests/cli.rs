use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conifold_core::resolved::ScenarioH;
use conifold_lab::config::{ScenarioKind, SCHEMA_VERSION};
use conifold_lab::{ReportDocument, RunConfig};
use tempfile::TempDir;

const SMALL_GRID: &str = r#"
[positivity]
n_list = [50, 100]
square_root_forms = 20

[positivity.grid]
z_radii = [0.0, 1.0, 2.0]
z_angles = 4
r_steps = 5
theta_steps = 3
phase_steps = 2

[positivity.search]
kappa = 1.0
c0_max = 1e6
rel_tol = 1e-6
c2_samples = 801
"#;

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conifold-lab"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("CONIFOLD_LAB_JOBS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn report(dir: &Path, command: &str) -> ReportDocument {
    ReportDocument::read(&dir.join("out").join(format!("{command}.json"))).unwrap()
}

fn assert_well_formed(doc: &ReportDocument) {
    let ids: BTreeSet<_> = doc.checks.iter().map(|c| c.check_id.as_str()).collect();
    assert_eq!(ids.len(), doc.checks.len(), "duplicate check ids");
    assert!(doc.checks.iter().all(|c| !c.reference.trim().is_empty()));
    assert_eq!(doc.summary.pass, doc.checks.iter().all(|c| c.pass));
    assert_eq!(doc.schema_version, SCHEMA_VERSION);
}

#[test]
fn config_round_trips_through_toml() {
    let mut config = RunConfig { seed: 17, jobs: Some(3), ..Default::default() };
    config.positivity.scenario.kind = ScenarioKind::Custom;
    config.positivity.scenario.custom = Some(ScenarioH::random(4));
    config.curvature.extra_ratios = vec![1.0, 1.25];
    let text = config.to_toml().unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), config);
    assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
}

#[test]
fn profile_passes_and_writes_full_precision_csv() {
    let dir = TempDir::new().unwrap();
    let out = lab(dir.path(), &["profile"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = report(dir.path(), "profile");
    assert_well_formed(&doc);
    assert!(doc.summary.pass);
    let csv = std::fs::read_to_string(dir.path().join("out/profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "kind,t,r2,eta,f,f1,f2,f3,f4,ode_residual");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mantissa = row[2].split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
    assert!(csv.lines().any(|l| l.starts_with("deformed,")));
}

#[test]
fn tightened_tolerances_still_pass_the_ode_checks() {
    let dir = TempDir::new().unwrap();
    let out = lab(dir.path(), &["profile", "--tolerance-scale", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = report(dir.path(), "profile");
    let ode = doc.checks.iter().find(|c| c.check_id == "profile.ode.deformed.t=1e-3").unwrap();
    assert!((ode.tolerance.unwrap() - 1e-10).abs() < 1e-24);
    assert!(ode.pass);
}

#[test]
fn invalid_configs_exit_with_code_one() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("t0.toml", "[profile]\nt_list = [0.0]\n", "profile"),
        ("n3.toml", "[cutoff]\nn_list = [3]\n", "cutoff"),
        ("schema.toml", "schema_version = 99\n", "cutoff"),
        ("unknown.toml", "[cutoff]\nbogus = 1\n", "cutoff"),
        ("tol.toml", "tolerance_scale = -1.0\n", "cutoff"),
    ];
    for (name, text, command) in cases {
        let path = write_config(dir.path(), name, text);
        let out = lab(dir.path(), &[command, "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = lab(dir.path(), &["cutoff", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = lab(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cutoff_reports_per_interval_minima() {
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), "one.toml", "[cutoff]\nn_list = [100]\n");
    let out = lab(dir.path(), &["cutoff", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = report(dir.path(), "cutoff");
    assert_well_formed(&doc);
    let row = doc.checks.iter().find(|c| c.check_id == "cutoff.minima.n=100").unwrap();
    for key in ["min_chi1_mid", "min_law_mid", "min_chi1_patch", "min_law_patch"] {
        assert!(row.measured[key].is_number(), "{key}");
    }
    let full = TempDir::new().unwrap();
    assert_eq!(lab(full.path(), &["cutoff"]).status.code(), Some(0));
    assert!(report(full.path(), "cutoff").checks.iter().any(|c| c.check_id == "cutoff.c1_variation" && c.pass));
}

#[test]
fn trivial_scenario_needs_almost_no_correction() {
    let dir = TempDir::new().unwrap();
    let text = format!("{SMALL_GRID}\n[positivity.scenario]\nkind = \"trivial\"\n");
    let path = write_config(dir.path(), "trivial.toml", &text);
    let out = lab(dir.path(), &["positivity", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = report(dir.path(), "positivity");
    assert_well_formed(&doc);
    let search = doc.checks.iter().find(|c| c.check_id == "positivity.search").unwrap();
    assert!(search.measured["c0_star"].as_f64().unwrap() < 1e-6);
    assert!(dir.path().join("out/positivity_frontier.json").exists());
}

#[test]
fn default_scenario_frontier_is_monotone() {
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), "small.toml", SMALL_GRID);
    let out = lab(dir.path(), &["positivity", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = report(dir.path(), "positivity");
    for id in ["positivity.frontier_monotone", "positivity.oracle", "positivity.phi_identity", "positivity.square_root"]
    {
        assert!(doc.checks.iter().any(|c| c.check_id == id && c.pass), "{id}");
    }
}

#[test]
fn curvature_lists_points_inside_the_tip_guard() {
    let dir = TempDir::new().unwrap();
    let text = "[curvature]\nt_list = [0.1, 1.0]\nratio_steps = 8\nextra_ratios = [1.0, 1.0005]\n";
    let path = write_config(dir.path(), "tip.toml", text);
    let out = lab(dir.path(), &["curvature", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = report(dir.path(), "curvature");
    assert_well_formed(&doc);
    let bound = doc.checks.iter().find(|c| c.check_id == "curvature.bound").unwrap();
    assert_eq!(bound.measured["rejected"].as_array().unwrap().len(), 4);
    let csv = std::fs::read_to_string(dir.path().join("out/curvature.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 8);
}

#[test]
fn failed_verification_exits_with_code_two() {
    let dir = TempDir::new().unwrap();
    let text = "[curvature]\nt_list = [1.0]\nratio_steps = 4\ns3_tol = 1e-15\n";
    let path = write_config(dir.path(), "strict.toml", text);
    let out = lab(dir.path(), &["curvature", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc = report(dir.path(), "curvature");
    assert!(!doc.summary.pass);
    assert!(doc.checks.iter().any(|c| c.check_id.starts_with("curvature.s3_limit") && !c.pass));
}

#[test]
fn reports_are_bit_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), "c.toml", "[curvature]\nratio_steps = 12\n");
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let out = Command::new(env!("CARGO_BIN_EXE_conifold-lab"))
            .args(["curvature", "--config", path.to_str().unwrap(), "--out"])
            .arg(dir.path().join("out"))
            .env("CONIFOLD_LAB_JOBS", jobs)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let json = std::fs::read_to_string(dir.path().join("out/curvature.json")).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("out/curvature.csv")).unwrap();
        outputs.push((json, csv));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(!outputs[0].0.contains("wall_time_s"));
}

#[test]
fn timings_flag_adds_wall_times() {
    let dir = TempDir::new().unwrap();
    assert_eq!(lab(dir.path(), &["cutoff", "--timings"]).status.code(), Some(0));
    let doc = report(dir.path(), "cutoff");
    assert!(doc.wall_time_s.is_some());
    assert!(doc.checks.iter().all(|c| c.wall_time_s.is_some()));
}

#[test]
fn report_merges_inputs_into_one_verdict() {
    let dir = TempDir::new().unwrap();
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(lab(a.path(), &["cutoff"]).status.code(), Some(0));
    let text = "[curvature]\nt_list = [1.0]\nratio_steps = 4\n";
    let path = write_config(b.path(), "c.toml", text);
    assert_eq!(lab(b.path(), &["curvature", "--config", path.to_str().unwrap()]).status.code(), Some(0));
    let inputs = [a.path().join("out/cutoff.json"), b.path().join("out/curvature.json")];
    let args: Vec<&str> = std::iter::once("report").chain(inputs.iter().map(|p| p.to_str().unwrap())).collect();

    assert_eq!(lab(dir.path(), &args).status.code(), Some(0));
    let merged = report(dir.path(), "report");
    assert_well_formed(&merged);
    assert!(merged.summary.pass);
    assert_eq!(
        merged.checks.len(),
        report(a.path(), "cutoff").checks.len() + report(b.path(), "curvature").checks.len()
    );

    let mut failing = report(a.path(), "cutoff");
    failing.checks[0].pass = false;
    failing.write(&a.path().join("out/cutoff.json")).unwrap();
    assert_eq!(lab(dir.path(), &args).status.code(), Some(2));
    assert!(!report(dir.path(), "report").summary.pass);

    assert_eq!(lab(dir.path(), &["report"]).status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    assert_eq!(lab(dir.path(), &["report", missing.to_str().unwrap()]).status.code(), Some(1));
}
