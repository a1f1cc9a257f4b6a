//! Run configuration, read from TOML. Every field has a default, so an empty
//! file (or no file) describes the full default suite.

use std::path::{Path, PathBuf};

use conifold_core::deformed::default_eps_list;
use conifold_core::resolved::{default_n_candidates, AnnulusGrid, ScenarioH, SearchOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Seed for random scenarios and random forms.
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Multiplies every tolerance below.
    pub tolerance_scale: f64,
    pub out_dir: PathBuf,
    /// Adds wall times to reports, which then differ between runs.
    pub timings: bool,
    pub profile: ProfileConfig,
    pub cutoff: CutoffConfig,
    pub positivity: PositivityConfig,
    pub curvature: CurvatureConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            jobs: None,
            tolerance_scale: 1.0,
            out_dir: PathBuf::from("conifold-lab-out"),
            timings: false,
            profile: ProfileConfig::default(),
            cutoff: CutoffConfig::default(),
            positivity: PositivityConfig::default(),
            curvature: CurvatureConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    /// Deformation parameters of the deformed profiles.
    pub t_list: Vec<f64>,
    /// Log grid of `r²/t` for the deformed profiles.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_steps: usize,
    /// Log grid of `r²` for the cone and the resolved profile.
    pub r2_min: f64,
    pub r2_max: f64,
    pub r2_steps: usize,
    pub ode_tol: f64,
    pub ode_fd_tol: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_steps: usize,
    pub h_low_tol: f64,
    pub h_high_tol: f64,
    pub convergence_k: Vec<usize>,
    pub convergence_delta: f64,
    pub convergence_t_list: Vec<f64>,
    pub convergence_grid: usize,
    /// Bound on the `k = 1` error at the smallest `t`.
    pub convergence_k1_tol: f64,
    pub ratio_delta_prime: f64,
    pub ratio_delta: f64,
    pub ratio_t: f64,
    pub ratio_grid: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            t_list: vec![1e-3, 1e-2, 1e-1, 1.0],
            ratio_min: 1.001,
            ratio_max: 1e3,
            ratio_steps: 50,
            r2_min: 1e-3,
            r2_max: 1e3,
            r2_steps: 25,
            ode_tol: 1e-9,
            ode_fd_tol: 1e-6,
            tau_min: 1e-3,
            tau_max: 20.0,
            tau_steps: 1000,
            h_low_tol: 1e-5,
            h_high_tol: 1e-8,
            convergence_k: vec![0, 1, 2],
            convergence_delta: 0.25,
            convergence_t_list: vec![1e-1, 1e-2, 1e-3, 1e-4],
            convergence_grid: 2001,
            convergence_k1_tol: 1e-2,
            ratio_delta_prime: 0.05,
            ratio_delta: 0.2,
            ratio_t: 1e-4,
            ratio_grid: 1001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutoffConfig {
    pub n_list: Vec<u32>,
    pub c1_variation_tol: f64,
    pub law_tol: f64,
    pub law_samples: usize,
}

impl Default for CutoffConfig {
    fn default() -> Self {
        Self { n_list: vec![50, 100, 500, 1000], c1_variation_tol: 0.2, law_tol: 1e-12, law_samples: 2001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Default,
    Trivial,
    /// Sampled from the run seed.
    Random,
    /// Taken from `positivity.scenario.custom`.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Multiplies every coefficient of `a`.
    pub a_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<ScenarioH>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { kind: ScenarioKind::Default, a_scale: 1.0, custom: None }
    }
}

impl ScenarioConfig {
    pub fn build(&self, seed: u64) -> Result<ScenarioH, CliError> {
        let mut s = match self.kind {
            ScenarioKind::Default => ScenarioH::default(),
            ScenarioKind::Trivial => ScenarioH::trivial(),
            ScenarioKind::Random => ScenarioH::random(seed),
            ScenarioKind::Custom => self
                .custom
                .clone()
                .ok_or_else(|| CliError::Config("scenario kind \"custom\" needs positivity.scenario.custom".into()))?,
        };
        for term in &mut s.a.terms {
            term.coeff *= self.a_scale;
        }
        s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositivityConfig {
    pub n_list: Vec<u32>,
    pub n_candidates: Vec<u32>,
    pub c0_limit: f64,
    pub c2_variation_tol: f64,
    pub phi_tol: f64,
    pub oracle_n: u32,
    pub oracle_points: usize,
    pub oracle_random_scenarios: usize,
    /// Differences above this are listed as mismatches.
    pub oracle_tol: f64,
    /// Differences above this fail the check.
    pub oracle_fail_tol: f64,
    pub square_root_forms: usize,
    pub square_root_tol: f64,
    pub scenario: ScenarioConfig,
    pub grid: AnnulusGrid,
    pub search: SearchOptions,
}

impl Default for PositivityConfig {
    fn default() -> Self {
        Self {
            n_list: vec![100, 200, 400],
            n_candidates: default_n_candidates(),
            c0_limit: 1e3,
            c2_variation_tol: 0.2,
            phi_tol: 1e-12,
            oracle_n: 100,
            oracle_points: 20,
            oracle_random_scenarios: 5,
            oracle_tol: 1e-8,
            oracle_fail_tol: 1e-6,
            square_root_forms: 100,
            square_root_tol: 1e-9,
            scenario: ScenarioConfig::default(),
            grid: AnnulusGrid::default(),
            search: SearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureConfig {
    pub t_list: Vec<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_steps: usize,
    /// Ratios `r²/t` added to the grid, for example `1.0` to probe the tip guard.
    pub extra_ratios: Vec<f64>,
    /// Factor by which the extended grid widens both `t` and `r²/t`.
    pub extension_factor: f64,
    pub c_hat_drift_tol: f64,
    pub ricci_tol: f64,
    pub symmetry_tol: f64,
    pub identity_tol: f64,
    pub metric_tol: f64,
    pub volume_tol: f64,
    pub grad_tol: f64,
    /// `(t, r²/t)` pairs for the finite-difference curvature oracle.
    pub fd_points: Vec<[f64; 2]>,
    pub fd_tol: f64,
    pub s3_t_list: Vec<f64>,
    pub s3_eps_list: Vec<f64>,
    pub s3_tol: f64,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self {
            t_list: vec![1e-3, 1e-2, 1e-1, 1.0],
            ratio_min: 1.001,
            ratio_max: 1e3,
            ratio_steps: 40,
            extra_ratios: vec![],
            extension_factor: 10.0,
            c_hat_drift_tol: 0.1,
            ricci_tol: 1e-8,
            symmetry_tol: 1e-10,
            identity_tol: 1e-10,
            metric_tol: 1e-10,
            volume_tol: 1e-10,
            grad_tol: 1e-12,
            fd_points: vec![[1.0, 2.0], [1.0, 1.001], [1e-3, 1e3], [1e-2, 50.0], [0.1, 1.3]],
            fd_tol: 1e-3,
            s3_t_list: vec![0.1, 1.0],
            s3_eps_list: default_eps_list(),
            s3_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// JSON reports to merge.
    pub inputs: Vec<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<(), CliError> {
    if v.is_empty() {
        Err(config_err(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

fn distinct(name: &str, v: &[f64]) -> Result<(), CliError> {
    for (i, a) in v.iter().enumerate() {
        if v[..i].contains(a) {
            return Err(config_err(format!("{name} repeats the value {a}")));
        }
    }
    Ok(())
}

fn log_range(name: &str, lo: f64, hi: f64, steps: usize) -> Result<(), CliError> {
    positive(&format!("{name} lower end"), lo)?;
    if !(hi > lo && hi.is_finite()) || steps < 2 {
        return Err(config_err(format!("{name} needs lo < hi and at least two steps")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| config_err(format!("cannot serialize config: {e}")))
    }

    /// A tolerance from the file, scaled by `tolerance_scale`.
    pub fn tol(&self, base: f64) -> f64 {
        base * self.tolerance_scale
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        positive("tolerance_scale", self.tolerance_scale)?;
        if self.jobs == Some(0) {
            return Err(config_err("jobs must be at least 1"));
        }

        let p = &self.profile;
        nonempty("profile.t_list", &p.t_list)?;
        distinct("profile.t_list", &p.t_list)?;
        for &t in &p.t_list {
            positive("profile.t_list entry", t)?;
        }
        log_range("profile ratio grid", p.ratio_min, p.ratio_max, p.ratio_steps)?;
        if p.ratio_min <= 1.0 {
            return Err(config_err("profile.ratio_min must exceed 1 (r² above the tip)"));
        }
        log_range("profile r2 grid", p.r2_min, p.r2_max, p.r2_steps)?;
        log_range("profile tau grid", p.tau_min, p.tau_max, p.tau_steps)?;
        for (name, v) in [
            ("profile.ode_tol", p.ode_tol),
            ("profile.ode_fd_tol", p.ode_fd_tol),
            ("profile.h_low_tol", p.h_low_tol),
            ("profile.h_high_tol", p.h_high_tol),
            ("profile.convergence_k1_tol", p.convergence_k1_tol),
        ] {
            positive(name, v)?;
        }
        nonempty("profile.convergence_k", &p.convergence_k)?;
        if let Some(k) = p.convergence_k.iter().find(|&&k| k > 4) {
            return Err(config_err(format!("profile.convergence_k entries must be at most 4, got {k}")));
        }
        nonempty("profile.convergence_t_list", &p.convergence_t_list)?;

        let c = &self.cutoff;
        nonempty("cutoff.n_list", &c.n_list)?;
        if let Some(n) = c.n_list.iter().find(|&&n| n < 4) {
            return Err(config_err(format!("cutoff.n_list entries need n >= 4, got {n}")));
        }
        positive("cutoff.c1_variation_tol", c.c1_variation_tol)?;
        positive("cutoff.law_tol", c.law_tol)?;
        if c.law_samples < 2 {
            return Err(config_err("cutoff.law_samples must be at least 2"));
        }

        let q = &self.positivity;
        nonempty("positivity.n_list", &q.n_list)?;
        nonempty("positivity.n_candidates", &q.n_candidates)?;
        if let Some(n) = q.n_list.iter().chain(&q.n_candidates).chain([&q.oracle_n]).find(|&&n| n < 4) {
            return Err(config_err(format!("positivity n values need n >= 4, got {n}")));
        }
        for (name, v) in [
            ("positivity.c0_limit", q.c0_limit),
            ("positivity.c2_variation_tol", q.c2_variation_tol),
            ("positivity.phi_tol", q.phi_tol),
            ("positivity.oracle_tol", q.oracle_tol),
            ("positivity.oracle_fail_tol", q.oracle_fail_tol),
            ("positivity.square_root_tol", q.square_root_tol),
            ("positivity.search.kappa", q.search.kappa),
            ("positivity.search.c0_max", q.search.c0_max),
            ("positivity.search.rel_tol", q.search.rel_tol),
        ] {
            positive(name, v)?;
        }
        if q.oracle_points == 0 {
            return Err(config_err("positivity.oracle_points must be positive"));
        }
        nonempty("positivity.grid.z_radii", &q.grid.z_radii)?;
        if q.grid.r_steps == 0 || q.grid.theta_steps == 0 {
            return Err(config_err("positivity.grid needs at least one radial and one angular step"));
        }

        let k = &self.curvature;
        nonempty("curvature.t_list", &k.t_list)?;
        distinct("curvature.t_list", &k.t_list)?;
        for &t in &k.t_list {
            positive("curvature.t_list entry", t)?;
        }
        log_range("curvature ratio grid", k.ratio_min, k.ratio_max, k.ratio_steps)?;
        if k.ratio_min < 1.0 || k.extra_ratios.iter().any(|&x| !(x >= 1.0 && x.is_finite())) {
            return Err(config_err("curvature ratios r²/t must be at least 1"));
        }
        if !(k.extension_factor > 1.0 && k.extension_factor.is_finite()) {
            return Err(config_err("curvature.extension_factor must exceed 1"));
        }
        for (name, v) in [
            ("curvature.c_hat_drift_tol", k.c_hat_drift_tol),
            ("curvature.ricci_tol", k.ricci_tol),
            ("curvature.symmetry_tol", k.symmetry_tol),
            ("curvature.identity_tol", k.identity_tol),
            ("curvature.metric_tol", k.metric_tol),
            ("curvature.volume_tol", k.volume_tol),
            ("curvature.grad_tol", k.grad_tol),
            ("curvature.fd_tol", k.fd_tol),
            ("curvature.s3_tol", k.s3_tol),
        ] {
            positive(name, v)?;
        }
        for &[t, x] in &k.fd_points {
            positive("curvature.fd_points t", t)?;
            if !(x > 1.0 && x.is_finite()) {
                return Err(config_err(format!("curvature.fd_points ratio must exceed 1, got {x}")));
            }
        }
        nonempty("curvature.s3_t_list", &k.s3_t_list)?;
        for &t in &k.s3_t_list {
            positive("curvature.s3_t_list entry", t)?;
        }
        Ok(())
    }
}
