//! `diagnostics.json`: partition, bound coefficients, the decay check and,
//! after a run, empirical regret and fidelity usage. Arm and fidelity
//! indices are one-based throughout.

use mfbandit::analysis::{bound_report, fidelity_usage_report, partition_arms, PartitionReport};
use mfbandit::model::check_decay_assumption;
use mfbandit::sim::PolicySummary;
use mfbandit::ProblemInstance64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

fn one_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|i| i + 1).collect()
}

/// Non-finite reals as strings, matching the library reports.
fn real(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn to_value<S: Serialize>(x: &S) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::Io(format!("serializing diagnostics: {e}")))
}

fn partition_view(p: &PartitionReport<f64>) -> Value {
    json!({
        "labels": p.labels.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "sets": p.sets.iter().map(|s| one_based(s)).collect::<Vec<_>>(),
        "optimal": one_based(&p.optimal),
        "gammas": p.gammas.iter().map(|&g| real(g)).collect::<Vec<_>>(),
        "first_kind": p.first_kind.iter().map(|s| one_based(s)).collect::<Vec<_>>(),
        "second_kind": p.second_kind.iter().map(|s| one_based(s)).collect::<Vec<_>>(),
        "candidates": p.candidates.iter().enumerate()
            .filter_map(|(k, c)| c.as_ref().map(|c| json!({"arm": k + 1, "fidelities": one_based(c)})))
            .collect::<Vec<_>>(),
    })
}

/// Diagnostics that need no simulation.
pub fn static_diagnostics(instance: &ProblemInstance64, rho: f64) -> Result<Value, CliError> {
    let model = instance.concentration();
    let partition = partition_arms(instance, &model);
    let mut bounds = to_value(&bound_report(instance, &model, rho))?;
    if let Some(rows) = bounds.get_mut("per_arm").and_then(Value::as_array_mut) {
        for row in rows {
            if let Some(k) = row["arm"].as_u64() {
                row["arm"] = json!(k + 1);
            }
        }
    }
    let mut decay = to_value(&check_decay_assumption(instance.ladder(), &model))?;
    if let Some(rows) = decay.get_mut("rows").and_then(Value::as_array_mut) {
        for row in rows {
            if let Some(m) = row["fidelity"].as_u64() {
                row["fidelity"] = json!(m + 1);
            }
        }
    }
    Ok(json!({
        "instance": {
            "num_arms": instance.num_arms(),
            "num_fidelities": instance.num_fidelities(),
            "mu_star": real(instance.mu_star()),
            "optimal_arms": one_based(instance.optimal_arms()),
        },
        "partition": partition_view(&partition),
        "bounds": bounds,
        "decay_assumption": decay,
    }))
}

/// Adds per-policy empirical regret against the upper coefficient and
/// per-arm fidelity usage to `static_diagnostics`.
pub fn run_diagnostics(
    instance: &ProblemInstance64,
    rho: f64,
    capital: f64,
    summaries: &[PolicySummary<f64>],
) -> Result<Value, CliError> {
    let mut out = static_diagnostics(instance, rho)?;
    let model = instance.concentration();
    let partition = partition_arms(instance, &model);
    let upper = out["bounds"]["upper_coefficient"].clone();
    let n_lambda = (capital / instance.ladder().top_cost()).floor();
    let mut empirical = Vec::new();
    let mut usage = serde_json::Map::new();
    for s in summaries {
        let final_regret = s.mean_regret.last().copied().unwrap_or(0.0);
        empirical.push(json!({
            "policy": s.policy.name(),
            "capital": real(s.checkpoints.last().copied().unwrap_or(capital)),
            "mean_regret": real(final_regret),
            "n_lambda": real(n_lambda),
            "regret_per_log_n_lambda": real(final_regret / n_lambda.ln()),
            "upper_coefficient": upper,
            "mean_plays": real(s.mean_plays),
        }));
        let rows = fidelity_usage_report(s, &partition)?;
        let rows: Vec<Value> = rows
            .iter()
            .map(|r| {
                json!({
                    "arm": r.arm + 1,
                    "label": r.label.to_string(),
                    "mean_counts": r.mean_counts.iter().map(|&c| real(c)).collect::<Vec<_>>(),
                    "mean_above_partition": r.mean_above_partition.map(real),
                })
            })
            .collect();
        usage.insert(s.policy.name().to_string(), Value::Array(rows));
    }
    out["empirical"] = Value::Array(empirical);
    out["usage"] = Value::Object(usage);
    Ok(out)
}
