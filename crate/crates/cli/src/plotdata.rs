//! The `plotdata` command: long-format merges of a run's CSV outputs.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use mfbandit::ProblemData64;
use serde::Deserialize;

use crate::error::{io_err, CliError};
use crate::run::{PLAYS_HEADER, REGRET_HEADER};

pub const PLOT_REGRET_HEADER: [&str; 4] = ["capital", "policy", "mean", "std"];
pub const PLOT_PLAYS_HEADER: [&str; 4] = ["arm_rank_by_muM", "fidelity", "mean_count", "policy"];

#[derive(Deserialize)]
struct ManifestConfig {
    policies: Vec<String>,
}

#[derive(Deserialize)]
struct Manifest {
    config: ManifestConfig,
    instance: ProblemData64,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Rows of a CSV with the expected header, as raw strings.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, CliError> {
    let text = read(path)?;
    let bad = |msg: String| CliError::Invalid(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(bad(format!("expected columns {}", header.join(","))));
    }
    reader
        .records()
        .map(|r| r.map_err(|e| bad(e.to_string())))
        .collect()
}

/// Arm indices (zero-based) in increasing order of top-fidelity mean; ties
/// keep index order.
pub fn arms_by_target_mean(data: &ProblemData64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.means.len()).collect();
    let target = |k: usize| data.means[k].last().copied().unwrap_or(f64::NAN);
    order.sort_by(|&a, &b| target(a).total_cmp(&target(b)));
    order
}

/// The two plot files' contents, `(plot_regret.csv, plot_plays.csv)`.
pub fn plotdata(dir: &Path) -> Result<(Vec<u8>, Vec<u8>), CliError> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&read(&manifest_path)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", manifest_path.display())))?;
    let rank: HashMap<usize, usize> = arms_by_target_mean(&manifest.instance)
        .into_iter()
        .enumerate()
        .map(|(r, k)| (k + 1, r + 1))
        .collect();

    let fail = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    let mut regret = csv::Writer::from_writer(Vec::new());
    let mut plays = csv::Writer::from_writer(Vec::new());
    regret.write_record(PLOT_REGRET_HEADER).map_err(fail)?;
    plays.write_record(PLOT_PLAYS_HEADER).map_err(fail)?;
    for policy in &manifest.config.policies {
        for row in read_csv(&dir.join(format!("regret_{policy}.csv")), &REGRET_HEADER)? {
            regret
                .write_record([&row[0], policy.as_str(), &row[1], &row[2]])
                .map_err(fail)?;
        }
        let path = dir.join(format!("plays_{policy}.csv"));
        let mut rows: Vec<(usize, usize, csv::StringRecord)> = Vec::new();
        for row in read_csv(&path, &PLAYS_HEADER)? {
            let parse = |i: usize| {
                row[i].parse::<usize>().map_err(|e| {
                    CliError::Invalid(format!("{}: bad index '{}': {e}", path.display(), &row[i]))
                })
            };
            let (arm, fidelity) = (parse(0)?, parse(1)?);
            let r = *rank.get(&arm).ok_or_else(|| {
                CliError::Invalid(format!("{}: arm {arm} not in manifest instance", path.display()))
            })?;
            rows.push((r, fidelity, row));
        }
        rows.sort_by_key(|&(r, m, _)| (r, m));
        for (r, _, row) in rows {
            plays
                .write_record([r.to_string().as_str(), &row[1], &row[2], policy.as_str()])
                .map_err(fail)?;
        }
    }
    let finish = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| CliError::Io(format!("csv: {e}")));
    Ok((finish(regret)?, finish(plays)?))
}

pub fn plotdata_command(dir: &Path) -> Result<(), CliError> {
    let (regret, plays) = plotdata(dir)?;
    for (name, contents) in [("plot_regret.csv", regret), ("plot_plays.csv", plays)] {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
    }
    Ok(())
}
