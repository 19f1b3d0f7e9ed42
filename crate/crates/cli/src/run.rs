//! The `run` command: simulate, then write regret curves, play histograms,
//! diagnostics and a manifest.

use std::fs;
use std::path::Path;

use mfbandit::analysis::partition_arms;
use mfbandit::sim::{generate_instance, instance_rng, run_batch, BatchConfig, InstanceSource, PolicySummary};
use mfbandit::{BatchResult64, GeneratorSpec64, ProblemInstance64};
use serde_json::json;

use crate::config::{preset, ExperimentConfig, ProblemSource};
use crate::error::{io_err, CliError};
use crate::report::run_diagnostics;

pub const REGRET_HEADER: [&str; 6] = [
    "capital",
    "mean_regret",
    "std_regret",
    "mean_rtilde",
    "mean_Rtilde",
    "replications",
];
pub const PLAYS_HEADER: [&str; 4] = ["arm", "fidelity", "mean_count", "partition_label"];

/// Everything a run writes, held in memory until the simulation succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, Vec<u8>)>,
    pub instance: ProblemInstance64,
    pub batch: BatchResult64,
}

impl RunOutputs {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

/// Instance the run is analysed on, plus the source the batch draws from.
/// Generated problems use one instance drawn from the base seed unless
/// `regenerate_instance` asks for a fresh draw per replication.
fn resolve_problem(
    config: &ExperimentConfig,
) -> Result<(ProblemInstance64, InstanceSource<f64>, Option<GeneratorSpec64>), CliError> {
    let spec = match &config.problem {
        ProblemSource::Instance(instance) => {
            if config.regenerate_instance {
                return Err(CliError::Invalid(
                    "regenerate_instance requires a generator or preset problem".into(),
                ));
            }
            return Ok((instance.clone(), InstanceSource::Fixed(instance.clone()), None));
        }
        ProblemSource::Generator(spec) => spec.clone(),
        ProblemSource::Preset(name) => {
            preset(name).ok_or_else(|| CliError::Invalid(format!("unknown preset '{name}'")))?
        }
    };
    spec.validate()?;
    let instance = generate_instance(&spec, &mut instance_rng(config.base_seed))?;
    let source = if config.regenerate_instance {
        InstanceSource::Generated(spec.clone())
    } else {
        InstanceSource::Fixed(instance.clone())
    };
    Ok((instance, source, Some(spec)))
}

/// Shortest text that parses back to `x`, in positional or exponent form.
pub fn fmt_real(x: f64) -> String {
    let plain = x.to_string();
    let exp = format!("{x:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::Io(format!("csv: {e}")))
}

fn regret_csv(s: &PolicySummary<f64>) -> Result<Vec<u8>, CliError> {
    let rows = (0..s.checkpoints.len()).map(|j| {
        vec![
            fmt_real(s.checkpoints[j]),
            fmt_real(s.mean_regret[j]),
            fmt_real(s.std_regret[j]),
            fmt_real(s.mean_unused_regret[j]),
            fmt_real(s.mean_play_regret[j]),
            s.replications.to_string(),
        ]
    });
    csv_bytes(&REGRET_HEADER, rows)
}

fn plays_csv(s: &PolicySummary<f64>, labels: &[String]) -> Result<Vec<u8>, CliError> {
    let rows = (0..s.num_arms).flat_map(|k| {
        (0..s.num_fidelities).map(move |m| {
            vec![
                (k + 1).to_string(),
                (m + 1).to_string(),
                fmt_real(s.mean_count(k, m)),
                labels[k].clone(),
            ]
        })
    });
    csv_bytes(&PLAYS_HEADER, rows)
}

fn pretty(value: &serde_json::Value) -> Result<Vec<u8>, CliError> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(format!("serializing json: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Runs the experiment with `threads` workers and renders every output file.
/// Nothing touches the file system.
pub fn execute(config: &ExperimentConfig, threads: usize) -> Result<RunOutputs, CliError> {
    let (instance, source, spec) = resolve_problem(config)?;
    let checkpoints = config.checkpoint_grid(instance.ladder().top_cost());
    let batch = run_batch(
        &source,
        &BatchConfig {
            policies: config.policies.clone(),
            capital: config.capital,
            rho: config.rho,
            checkpoints: checkpoints.clone(),
            replications: config.replications,
            base_seed: config.base_seed,
            parallelism: threads,
        },
    )?;
    if !batch.violations.is_empty() {
        let dump = serde_json::to_string_pretty(&json!({ "violations": batch.violations }))
            .unwrap_or_else(|e| format!("{{\"error\": \"{e}\"}}"));
        return Err(CliError::Invariant {
            message: format!("{} invariant violation(s)", batch.violations.len()),
            dump,
        });
    }

    let labels: Vec<String> = partition_arms(&instance, &instance.concentration())
        .labels
        .iter()
        .map(ToString::to_string)
        .collect();
    let mut files = Vec::new();
    for s in &batch.summaries {
        files.push((format!("regret_{}.csv", s.policy.name()), regret_csv(s)?));
        files.push((format!("plays_{}.csv", s.policy.name()), plays_csv(s, &labels)?));
    }
    let mut diagnostics = run_diagnostics(&instance, config.rho, config.capital, &batch.summaries)?;
    if config.regenerate_instance {
        diagnostics["instance"]["note"] =
            json!("replications draw their own instances; diagnostics describe the base-seed draw");
    }
    files.push(("diagnostics.json".into(), pretty(&diagnostics)?));

    let mut echo = config.clone();
    if let Some(spec) = spec {
        echo.problem = ProblemSource::Generator(spec);
    }
    let preset_name = match &config.problem {
        ProblemSource::Preset(name) => Some(name.clone()),
        _ => None,
    };
    let manifest = json!({
        "config": echo,
        "preset": preset_name,
        "instance": instance,
        "instance_per_replication": config.regenerate_instance,
        "checkpoints": checkpoints,
        "replication_seeds": batch.replication_seeds,
        "versions": {
            "mfbandit": env!("CARGO_PKG_VERSION"),
            "manifest_format": 1,
        },
    });
    files.push(("manifest.json".into(), pretty(&manifest)?));
    Ok(RunOutputs { files, instance, batch })
}

/// Validated config in, files out; writes only after the batch succeeded.
pub fn run_command(config: &ExperimentConfig) -> Result<RunOutputs, CliError> {
    let threads = config.threads()?;
    let outputs = execute(config, threads)?;
    outputs.write_to(&config.output_dir)?;
    Ok(outputs)
}
