//! Report documents and the check runner that fills them.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use conifold_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::SCHEMA_VERSION;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub check_id: String,
    /// The mathematical statement being checked.
    pub reference: String,
    pub inputs: Value,
    pub measured: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
}

impl Summary {
    pub fn of(checks: &[Check]) -> Self {
        let passed = checks.iter().filter(|c| c.pass).count();
        Self { checks: checks.len(), passed, failed: checks.len() - passed, pass: passed == checks.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub summary: Summary,
    pub checks: Vec<Check>,
    /// Files written next to the report.
    pub artifacts: Vec<String>,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl ReportDocument {
    pub fn new(command: &str, checks: Vec<Check>, artifacts: Vec<String>, config: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            summary: Summary::of(&checks),
            checks,
            artifacts,
            config,
            wall_time_s: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read report {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid report {}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

/// Result of one check: whether it passed and what was measured.
pub struct Outcome {
    pub pass: bool,
    pub measured: Value,
}

impl Outcome {
    pub fn new(pass: bool, measured: Value) -> Self {
        Self { pass, measured }
    }
}

/// Collects checks with unique ids. Domain errors from the kernels are
/// configuration errors; every other kernel error fails the check.
pub struct Runner {
    timings: bool,
    checks: Vec<Check>,
    ids: BTreeSet<String>,
}

impl Runner {
    pub fn new(timings: bool) -> Self {
        Self { timings, checks: Vec::new(), ids: BTreeSet::new() }
    }

    pub fn check<F>(
        &mut self,
        id: &str,
        reference: &str,
        inputs: Value,
        tolerance: Option<f64>,
        f: F,
    ) -> Result<(), CliError>
    where
        F: FnOnce() -> conifold_core::Result<Outcome>,
    {
        let start = Instant::now();
        let result = f();
        let wall = self.timings.then(|| start.elapsed().as_secs_f64());
        let (pass, measured, error) = match result {
            Ok(o) => (o.pass, o.measured, None),
            Err(Error::Domain(msg)) => return Err(CliError::Config(format!("{id}: {msg}"))),
            Err(e) => (false, Value::Null, Some(e.to_string())),
        };
        self.push(Check {
            check_id: id.into(),
            reference: reference.into(),
            inputs,
            measured,
            tolerance,
            pass,
            error,
            wall_time_s: wall,
        });
        Ok(())
    }

    /// Runs a computation shared by several checks. On failure a failing
    /// check `id` is recorded and `None` returned.
    pub fn compute<T, F>(&mut self, id: &str, reference: &str, inputs: Value, f: F) -> Result<Option<T>, CliError>
    where
        F: FnOnce() -> conifold_core::Result<T>,
    {
        match f() {
            Ok(v) => Ok(Some(v)),
            Err(Error::Domain(msg)) => Err(CliError::Config(format!("{id}: {msg}"))),
            Err(e) => {
                self.push(Check {
                    check_id: id.into(),
                    reference: reference.into(),
                    inputs,
                    measured: Value::Null,
                    tolerance: None,
                    pass: false,
                    error: Some(e.to_string()),
                    wall_time_s: None,
                });
                Ok(None)
            }
        }
    }

    pub fn push(&mut self, check: Check) {
        assert!(self.ids.insert(check.check_id.clone()), "duplicate check id {}", check.check_id);
        self.checks.push(check);
    }

    pub fn into_checks(self) -> Vec<Check> {
        self.checks
    }
}
