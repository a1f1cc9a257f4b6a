use std::path::PathBuf;

use serde_json::json;

use crate::config::RunConfig;
use crate::report::{Check, ReportDocument};
use crate::CliError;

/// Merges prior reports. Check ids are prefixed with the source command and
/// its position in the input list, so merged ids stay unique.
pub fn run(config: &RunConfig, extra: &[PathBuf]) -> Result<ReportDocument, CliError> {
    let inputs: Vec<PathBuf> = config.report.inputs.iter().chain(extra).cloned().collect();
    if inputs.is_empty() {
        return Err(CliError::Config("report needs at least one input report".into()));
    }
    let mut checks: Vec<Check> = Vec::new();
    let mut sources = Vec::new();
    for (k, path) in inputs.iter().enumerate() {
        let doc = ReportDocument::read(path)?;
        for mut c in doc.checks {
            c.check_id = format!("{k}.{}.{}", doc.command, c.check_id);
            checks.push(c);
        }
        sources.push(json!({
            "path": path.display().to_string(),
            "command": doc.command,
            "summary": doc.summary,
            "config": doc.config,
        }));
    }
    Ok(ReportDocument::new("report", checks, vec![], json!({ "inputs": sources })))
}
