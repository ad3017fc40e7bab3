//! Report assembly and artifact writing.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};

/// Everything a command produces besides the exit code.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub result: Value,
    /// `t,err` rows.
    pub trace_csv: Option<String>,
    /// `source,target` rows.
    pub chain_edges_csv: Option<String>,
    pub orbit_json: Option<String>,
}

/// `{schema_version, command, status, generated_at?, config, result|error}`.
pub fn build_report(command: &str, config: &ExperimentConfig, outcome: Result<&Value, &str>, timestamp: bool) -> Value {
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
    });
    match outcome {
        Ok(result) => {
            report["status"] = json!("ok");
            report["result"] = result.clone();
        }
        Err(message) => {
            report["status"] = json!("error");
            report["error"] = json!(message);
        }
    }
    if timestamp {
        report["generated_at"] = json!(chrono::Utc::now().to_rfc3339());
    }
    report
}

pub fn write_artifacts(dir: &Path, report: &Value, artifacts: Option<&Artifacts>) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    fs::write(dir.join("report.json"), text)?;
    if let Some(a) = artifacts {
        if let Some(t) = &a.trace_csv {
            fs::write(dir.join("trace.csv"), t)?;
        }
        if let Some(e) = &a.chain_edges_csv {
            fs::write(dir.join("chain_edges.csv"), e)?;
        }
        if let Some(o) = &a.orbit_json {
            fs::write(dir.join("orbit.json"), o)?;
        }
    }
    Ok(())
}
