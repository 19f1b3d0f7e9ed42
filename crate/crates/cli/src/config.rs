//! Experiment configuration: JSON files, command-line overrides and the
//! built-in problem presets.

use std::fmt;
use std::path::PathBuf;

use mfbandit::model::{FidelityLadder, RewardFamily};
use mfbandit::policy::PolicyKind;
use mfbandit::sim::{default_checkpoints, HighFidelityMeans};
use mfbandit::{GeneratorSpec64, ProblemInstance64};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::CliError;

pub const PRESET_NAMES: [&str; 4] = ["paper-1", "paper-2", "paper-3", "paper-4"];
pub const DEFAULT_RHO: f64 = 2.0;
pub const DEFAULT_CHECKPOINTS: usize = 20;
pub const THREADS_ENV: &str = "MFBANDIT_THREADS";

/// Generator recipe of a named preset.
pub fn preset(name: &str) -> Option<GeneratorSpec64> {
    let ladder = |z: &[f64], c: &[f64]| FidelityLadder::from_f64(z, c).expect("preset ladders are valid");
    let grid = |lo, hi| HighFidelityMeans::UniformGrid { lo, hi };
    let spec = match name {
        "paper-1" => GeneratorSpec64 {
            num_arms: 500,
            ladder: ladder(&[0.2, 0.1, 0.0], &[1.0, 10.0, 1000.0]),
            family: RewardFamily::Gaussian { sigma: 0.2 },
            high_fidelity_means: grid(0.0, 1.0),
            optimal_arm_suppression: true,
        },
        "paper-2" => GeneratorSpec64 {
            num_arms: 500,
            ladder: ladder(&[1.0, 0.5, 0.2, 0.0], &[1.0, 5.0, 20.0, 50.0]),
            family: RewardFamily::Gaussian { sigma: 1.0 },
            high_fidelity_means: HighFidelityMeans::GaussianSample,
            optimal_arm_suppression: true,
        },
        "paper-3" => GeneratorSpec64 {
            num_arms: 200,
            ladder: ladder(&[0.2, 0.0], &[1.0, 10.0]),
            family: RewardFamily::Bernoulli,
            high_fidelity_means: grid(0.1, 0.9),
            optimal_arm_suppression: false,
        },
        "paper-4" => GeneratorSpec64 {
            num_arms: 1000,
            ladder: ladder(&[0.5, 0.2, 0.1, 0.05, 0.0], &[1.0, 3.0, 10.0, 30.0, 100.0]),
            family: RewardFamily::Bernoulli,
            high_fidelity_means: grid(0.1, 0.9),
            optimal_arm_suppression: false,
        },
        _ => return None,
    };
    Some(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSource {
    Preset(String),
    Generator(GeneratorSpec64),
    Instance(ProblemInstance64),
}

/// Explicit capitals or `log:<count>` (log-spaced from `50 λ^(M)` to the budget).
#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoints {
    Log(usize),
    Explicit(Vec<f64>),
}

impl Default for Checkpoints {
    fn default() -> Self {
        Checkpoints::Log(DEFAULT_CHECKPOINTS)
    }
}

impl Serialize for Checkpoints {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Checkpoints::Log(n) => s.collect_str(&format_args!("log:{n}")),
            Checkpoints::Explicit(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Checkpoints {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Checkpoints;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"log:<count>\" or an array of capitals")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Checkpoints, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_seq<A: de::SeqAccess<'de>>(self, mut seq: A) -> Result<Checkpoints, A::Error> {
                let mut out = Vec::new();
                while let Some(x) = seq.next_element::<f64>()? {
                    out.push(x);
                }
                Ok(Checkpoints::Explicit(out))
            }
        }
        d.deserialize_any(V)
    }
}

impl std::str::FromStr for Checkpoints {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let count = s
            .strip_prefix("log:")
            .ok_or_else(|| format!("invalid checkpoints '{s}', expected log:<count>"))?;
        count
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .map(Checkpoints::Log)
            .ok_or_else(|| format!("invalid checkpoint count in '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Auto,
    Threads(usize),
}

impl Parallelism {
    pub fn threads(self) -> usize {
        match self {
            Parallelism::Threads(n) => n.max(1),
            Parallelism::Auto => std::thread::available_parallelism().map_or(1, usize::from),
        }
    }
}

impl std::str::FromStr for Parallelism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Parallelism::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Parallelism::Threads(n)),
            _ => Err(format!("parallelism must be a positive integer or 'auto', got '{s}'")),
        }
    }
}

impl Serialize for Parallelism {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Parallelism::Auto => s.serialize_str("auto"),
            Parallelism::Threads(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Parallelism {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => format!("{n}").parse().map_err(de::Error::custom),
            Raw::S(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

/// A configuration file as written; every field optional so command-line
/// flags can fill the gaps.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub problem: Option<ProblemSource>,
    pub policies: Option<Vec<PolicyKind>>,
    pub rho: Option<f64>,
    pub capital: Option<f64>,
    pub checkpoints: Option<Checkpoints>,
    pub replications: Option<usize>,
    pub base_seed: Option<u64>,
    pub parallelism: Option<Parallelism>,
    pub output_dir: Option<PathBuf>,
    pub regenerate_instance: Option<bool>,
}

/// A written manifest; only its `config` member is read back.
#[derive(Deserialize)]
struct ManifestFile {
    config: PartialConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub capital: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub rho: Option<f64>,
    pub parallelism: Option<Parallelism>,
    pub out: Option<PathBuf>,
}

/// A complete, validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub policies: Vec<PolicyKind>,
    pub rho: f64,
    pub capital: f64,
    pub checkpoints: Checkpoints,
    pub replications: usize,
    pub base_seed: u64,
    pub parallelism: Parallelism,
    pub output_dir: PathBuf,
    /// Draw a fresh instance for every replication instead of one per run.
    pub regenerate_instance: bool,
}

/// One-based line of the first `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

/// Parses a configuration file or a previously written `manifest.json`.
pub fn parse_config(text: &str) -> Result<PartialConfig, CliError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Invalid(format!("config: {e}")))?;
    let is_manifest = value
        .as_object()
        .is_some_and(|o| o.get("config").is_some_and(serde_json::Value::is_object));
    let parsed = if is_manifest {
        serde_json::from_str::<ManifestFile>(text).map(|m| m.config)
    } else {
        serde_json::from_str::<PartialConfig>(text)
    };
    parsed.map_err(|e| CliError::Invalid(format!("config: {e}")))
}

impl ExperimentConfig {
    /// Merges file values with overrides and validates the result. `source`
    /// is the raw file text, used to point messages at lines.
    pub fn resolve(file: PartialConfig, overrides: &Overrides, source: Option<&str>) -> Result<Self, CliError> {
        let invalid = |key: &str, msg: String| {
            let at = source
                .and_then(|s| line_of(s, key))
                .map(|l| format!("config line {l}: "))
                .unwrap_or_default();
            CliError::Invalid(format!("{at}{msg}"))
        };

        let problem = match (&overrides.preset, file.problem) {
            (Some(name), _) => ProblemSource::Preset(name.clone()),
            (None, Some(p)) => p,
            (None, None) => {
                return Err(CliError::Invalid(
                    "no problem given: use --preset or a config with a \"problem\" field".into(),
                ))
            }
        };
        if let ProblemSource::Preset(name) = &problem {
            if preset(name).is_none() {
                return Err(invalid(
                    "preset",
                    format!("unknown preset '{name}' (expected one of {})", PRESET_NAMES.join(", ")),
                ));
            }
        }
        if let ProblemSource::Generator(spec) = &problem {
            spec.validate().map_err(|e| invalid("generator", e.to_string()))?;
        }

        let policies = file.policies.unwrap_or_else(|| vec![PolicyKind::MfUcb, PolicyKind::Ucb]);
        if policies.is_empty() {
            return Err(invalid("policies", "policies must not be empty".into()));
        }
        let mut deduped = policies.clone();
        deduped.sort();
        deduped.dedup();
        if deduped.len() != policies.len() {
            return Err(invalid("policies", "policies must not repeat".into()));
        }

        let rho = overrides.rho.or(file.rho).unwrap_or(DEFAULT_RHO);
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid("rho", format!("rho must be positive, got {rho}")));
        }
        let capital = overrides
            .capital
            .or(file.capital)
            .ok_or_else(|| CliError::Invalid("capital is required (--capital or \"capital\")".into()))?;
        if !(capital > 0.0 && capital.is_finite()) {
            return Err(invalid("capital", format!("capital must be positive, got {capital}")));
        }
        let replications = overrides.replications.or(file.replications).ok_or_else(|| {
            CliError::Invalid("replications is required (--replications or \"replications\")".into())
        })?;
        if replications < 1 {
            return Err(invalid("replications", "replications must be ≥ 1".into()));
        }
        let checkpoints = file.checkpoints.unwrap_or_default();
        match &checkpoints {
            Checkpoints::Log(0) => {
                return Err(invalid("checkpoints", "checkpoint count must be ≥ 1".into()))
            }
            Checkpoints::Explicit(v) => {
                if v.is_empty() {
                    return Err(invalid("checkpoints", "checkpoint list must not be empty".into()));
                }
                if v.iter().any(|&c| !(c >= 0.0 && c <= capital)) {
                    return Err(invalid("checkpoints", format!("checkpoints must lie in [0, {capital}]")));
                }
                if v.windows(2).any(|w| w[1] < w[0]) {
                    return Err(invalid("checkpoints", "checkpoints must be ascending".into()));
                }
            }
            Checkpoints::Log(_) => {}
        }

        Ok(Self {
            problem,
            policies,
            rho,
            capital,
            checkpoints,
            replications,
            base_seed: overrides.seed.or(file.base_seed).unwrap_or(0),
            parallelism: overrides.parallelism.or(file.parallelism).unwrap_or_default(),
            output_dir: overrides
                .out
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from("mfbandit-out")),
            regenerate_instance: file.regenerate_instance.unwrap_or(false),
        })
    }

    /// Capitals at which regret is reported.
    pub fn checkpoint_grid(&self, top_cost: f64) -> Vec<f64> {
        match &self.checkpoints {
            Checkpoints::Log(n) => default_checkpoints(top_cost, self.capital, *n),
            Checkpoints::Explicit(v) => v.clone(),
        }
    }

    /// Worker threads: `MFBANDIT_THREADS` wins over the configured value.
    pub fn threads(&self) -> Result<usize, CliError> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .parse::<Parallelism>()
                .map(Parallelism::threads)
                .map_err(|e| CliError::Invalid(format!("{THREADS_ENV}: {e}"))),
            Err(_) => Ok(self.parallelism.threads()),
        }
    }
}
