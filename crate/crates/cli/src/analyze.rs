//! The `analyze` command: diagnostics for an instance without simulating.

use std::path::Path;

use mfbandit::model::{validate_instance, ProblemData};
use mfbandit::sim::{generate_instance, instance_rng};
use mfbandit::{ProblemData64, ProblemInstance64};
use serde_json::Value;

use crate::config::{preset, PRESET_NAMES};
use crate::error::CliError;
use crate::report::static_diagnostics;

/// Parses an instance file: a bare instance, or a run manifest carrying one
/// under `"instance"`. Every validation failure is listed.
pub fn parse_instance(text: &str, origin: &Path) -> Result<ProblemInstance64, CliError> {
    let syntax = |e: serde_json::Error| CliError::Invalid(format!("{}: {e}", origin.display()));
    let value: Value = serde_json::from_str(text).map_err(syntax)?;
    let data: ProblemData64 = if value.get("instance").is_some_and(Value::is_object) {
        #[derive(serde::Deserialize)]
        struct Wrapped {
            instance: ProblemData<f64>,
        }
        serde_json::from_str::<Wrapped>(text).map_err(syntax)?.instance
    } else {
        serde_json::from_str(text).map_err(syntax)?
    };
    let violations = validate_instance(&data);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| format!("  - {v}")).collect();
        return Err(CliError::Invalid(format!(
            "{}: invalid instance:\n{}",
            origin.display(),
            list.join("\n")
        )));
    }
    Ok(ProblemInstance64::from_data(&data)?)
}

/// Instance for `analyze --preset`: the draw a `run` with the same seed uses.
pub fn preset_instance(name: &str, seed: u64) -> Result<ProblemInstance64, CliError> {
    let spec = preset(name).ok_or_else(|| {
        CliError::Invalid(format!(
            "unknown preset '{name}' (expected one of {})",
            PRESET_NAMES.join(", ")
        ))
    })?;
    Ok(generate_instance(&spec, &mut instance_rng(seed))?)
}

/// Pretty-printed `diagnostics.json` contents.
pub fn analyze(instance: &ProblemInstance64, rho: f64) -> Result<String, CliError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(CliError::Invalid(format!("rho must be positive, got {rho}")));
    }
    let value = static_diagnostics(instance, rho)?;
    serde_json::to_string_pretty(&value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Io(format!("serializing diagnostics: {e}")))
}
