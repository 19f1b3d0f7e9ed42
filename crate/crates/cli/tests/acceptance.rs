//! End-to-end acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! Runs the four presets at 50 replications and `Λ = 2000 λ^(M)`, plus the
//! randomized property sweeps.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{oracle_partition, random_bernoulli_instance, random_single_fidelity_instance, replay};
use mfbandit::analysis::{partition_arms, ArmLabel};
use mfbandit::policy::{fidelity_play_cap, PolicyKind};
use mfbandit::sim::{check_episode, log_checkpoints, run_episode, EpisodeConfig};
use mfbandit::{EpisodeResult64, ProblemInstance64};
use mfbandit_cli::config::{Checkpoints, Parallelism, ProblemSource, PRESET_NAMES};
use mfbandit_cli::run::{execute, RunOutputs};
use mfbandit_cli::ExperimentConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REPLICATIONS: usize = 50;
const CAPITAL_MULTIPLE: f64 = 2000.0;
const SEED: u64 = 2024;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn top_cost(name: &str) -> f64 {
    mfbandit_cli::config::preset(name).unwrap().ladder.top_cost()
}

fn preset_config(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSource::Preset(name.into()),
        policies: vec![PolicyKind::MfUcb, PolicyKind::Ucb],
        rho: 2.0,
        capital: CAPITAL_MULTIPLE * top_cost(name),
        checkpoints: Checkpoints::Log(20),
        replications: REPLICATIONS,
        base_seed: SEED,
        parallelism: Parallelism::Threads(1),
        output_dir: "unused".into(),
        regenerate_instance: false,
    }
}

/// Least-squares slope of `y` against `ln x`.
fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

fn criterion_regret(runs: &[(&str, RunOutputs)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, run) in runs {
        let mf = run.batch.summary(PolicyKind::MfUcb).unwrap();
        let ucb = run.batch.summary(PolicyKind::Ucb).unwrap();
        let (r_mf, r_ucb) = (*mf.mean_regret.last().unwrap(), *ucb.mean_regret.last().unwrap());
        let half = mf.checkpoints.len() / 2;
        let s_mf = log_slope(&mf.checkpoints[half..], &mf.mean_regret[half..]);
        let s_ucb = log_slope(&ucb.checkpoints[half..], &ucb.mean_regret[half..]);
        let ratio = r_mf / r_ucb;
        let mut good = r_mf < r_ucb && s_mf < s_ucb;
        if *name == "paper-1" || *name == "paper-4" {
            good &= ratio <= 0.9;
        }
        ok &= good;
        parts.push(format!(
            "{name}: R {r_mf:.1} vs {r_ucb:.1} (ratio {ratio:.3}), slope {s_mf:.1} vs {s_ucb:.1}{}",
            if good { "" } else { " FAIL" }
        ));
    }
    outcome(ok, parts.join("; "))
}

/// Single episodes of every preset with full play logs.
fn logged_preset_episodes() -> Vec<(ProblemInstance64, EpisodeResult64)> {
    let mut out = Vec::new();
    for name in PRESET_NAMES {
        let spec = mfbandit_cli::config::preset(name).unwrap();
        let inst = mfbandit::sim::generate_instance(&spec, &mut mfbandit::sim::instance_rng(SEED)).unwrap();
        let capital = CAPITAL_MULTIPLE * spec.ladder.top_cost();
        for seed in 0..2 {
            for policy in [PolicyKind::MfUcb, PolicyKind::Ucb] {
                let r = run_episode(
                    &inst,
                    &EpisodeConfig {
                        policy,
                        capital,
                        rho: 2.0,
                        checkpoints: log_checkpoints(50.0 * spec.ladder.top_cost(), capital, 20),
                        seed,
                        record_plays: true,
                    },
                )
                .unwrap();
                out.push((inst.clone(), r));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for seed in 0..200 {
        let inst = random_bernoulli_instance(&mut rng, 10, 4);
        let capital = inst.ladder().top_cost() * rng.random_range(20.0..500.0);
        for policy in [PolicyKind::MfUcb, PolicyKind::Ucb] {
            let r = run_episode(
                &inst,
                &EpisodeConfig {
                    policy,
                    capital,
                    rho: 2.0,
                    checkpoints: log_checkpoints(capital / 100.0, capital, 10),
                    seed,
                    record_plays: true,
                },
            )
            .unwrap();
            out.push((inst.clone(), r));
        }
    }
    out
}

fn batch_violations(runs: &[(&str, RunOutputs)], invariant: &str) -> usize {
    runs.iter()
        .flat_map(|(_, r)| &r.batch.violations)
        .filter(|v| v.violation.invariant == invariant)
        .count()
}

fn criterion_hard_cap(runs: &[(&str, RunOutputs)], logged: &[(ProblemInstance64, EpisodeResult64)]) -> Outcome {
    let mut breaches = batch_violations(runs, "fidelity cap");
    let mut checked = 0u64;
    for (inst, r) in logged.iter().filter(|(_, r)| r.policy == PolicyKind::MfUcb) {
        let model = inst.concentration();
        for m in 0..inst.ladder().top() {
            let cap = fidelity_play_cap(inst.ladder(), &model, r.rho, m, r.plays).unwrap();
            for k in 0..inst.num_arms() {
                checked += 1;
                if r.count(k, m) > cap {
                    breaches += 1;
                }
            }
        }
    }
    let episodes = runs.len() * REPLICATIONS * 2 + logged.len();
    outcome(
        breaches == 0,
        format!("{breaches} breaches; {episodes} episodes checked, {checked} explicit (arm, fidelity) caps"),
    )
}

fn criterion_regret_identity(runs: &[(&str, RunOutputs)], logged: &[(ProblemInstance64, EpisodeResult64)]) -> Outcome {
    let mut failures = batch_violations(runs, "regret identity");
    let mut worst = 0.0f64;
    let mut checkpoints = 0;
    for (inst, r) in logged {
        let log = r.ledger.as_ref().unwrap();
        for cp in &r.checkpoints {
            checkpoints += 1;
            let scale = cp.regret.abs().max(1.0);
            let identity = (cp.regret - (cp.unused_regret + cp.play_regret)).abs() / scale;
            let (plays, _, regret, unused, play) = replay(inst, log, cp.capital);
            let oracle = [
                (cp.regret - regret).abs(),
                (cp.unused_regret - unused).abs(),
                (cp.play_regret - play).abs(),
            ]
            .into_iter()
            .fold(0.0, f64::max)
                / scale;
            worst = worst.max(identity).max(oracle);
            if identity > 1e-9 || oracle > 1e-9 || plays != cp.plays {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!("{failures} failures over all batch episodes and {checkpoints} replayed checkpoints; worst relative gap {worst:.2e}"),
    )
}

fn criterion_single_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    let mut mismatches = 0;
    let mut plays = 0;
    for seed in 0..100 {
        let inst = random_single_fidelity_instance(&mut rng, 20);
        let capital = inst.ladder().top_cost() * rng.random_range(100.0..3000.0);
        let trace = |policy| {
            let r = run_episode(
                &inst,
                &EpisodeConfig {
                    policy,
                    capital,
                    rho: 2.0,
                    checkpoints: vec![capital],
                    seed,
                    record_plays: true,
                },
            )
            .unwrap();
            r.ledger.unwrap().iter().map(|p| (p.arm, p.fidelity)).collect::<Vec<_>>()
        };
        let (mf, ucb) = (trace(PolicyKind::MfUcb), trace(PolicyKind::Ucb));
        plays += mf.len();
        if mf != ucb {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/100 traces differ ({plays} plays compared)"))
}

fn criterion_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let mut mismatches = 0;
    let mut not_partition = 0;
    for _ in 0..1000 {
        let inst = random_bernoulli_instance(&mut rng, 10, 4);
        let got = partition_arms(&inst, &inst.concentration());
        let want = oracle_partition(&inst);
        let candidates: Vec<(usize, Vec<usize>)> = got
            .candidates
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.clone().map(|c| (k, c)))
            .collect();
        if got.sets != want.sets
            || got.optimal != want.optimal
            || got.first_kind != want.first_kind
            || got.second_kind != want.second_kind
            || candidates != want.candidates
        {
            mismatches += 1;
        }
        let mut seen = vec![0; inst.num_arms()];
        for &k in got.sets.iter().flatten().chain(&got.optimal) {
            seen[k] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            not_partition += 1;
        }
    }
    outcome(
        mismatches == 0 && not_partition == 0,
        format!("{mismatches} oracle mismatches, {not_partition} non-partitions in 1000 instances"),
    )
}

fn criterion_usage(runs: &[(&str, RunOutputs)]) -> Outcome {
    let (_, run) = runs.iter().find(|(n, _)| *n == "paper-1").unwrap();
    let partition = partition_arms(&run.instance, &run.instance.concentration());
    let mf = run.batch.summary(PolicyKind::MfUcb).unwrap();
    let ucb = run.batch.summary(PolicyKind::Ucb).unwrap();
    let first: Vec<usize> = (0..mf.num_arms)
        .filter(|&k| partition.labels[k] == ArmLabel::Fidelity(0))
        .collect();
    let worst = first
        .iter()
        .map(|&k| mf.mean_count(k, 1) + mf.mean_count(k, 2))
        .fold(0.0, f64::max);
    let ucb_low: f64 = (0..ucb.num_arms)
        .map(|k| ucb.mean_count(k, 0) + ucb.mean_count(k, 1))
        .sum();
    outcome(
        !first.is_empty() && worst <= 20.0 && ucb_low == 0.0,
        format!(
            "{} arms in the first partition, max mean plays above it {worst}; UCB mean plays below the top {ucb_low}",
            first.len()
        ),
    )
}

fn criterion_budget(runs: &[(&str, RunOutputs)], logged: &[(ProblemInstance64, EpisodeResult64)]) -> Outcome {
    let mut failures = batch_violations(runs, "budget") + batch_violations(runs, "play range")
        + batch_violations(runs, "play counts");
    for (inst, r) in logged {
        let ladder = inst.ladder();
        let lo = (r.capital / ladder.top_cost()).floor() as u64;
        let hi = (r.capital / ladder.cost(0)).floor() as u64;
        if !(r.spent <= r.capital && lo <= r.plays && r.plays <= hi) || !check_episode(inst, r).is_empty() {
            failures += 1;
        }
    }
    let episodes = runs.len() * REPLICATIONS * 2 + logged.len();
    outcome(failures == 0, format!("{failures} failures in {episodes} episodes"))
}

fn criterion_determinism(runs: &[(&str, RunOutputs)]) -> Outcome {
    let mut differing = Vec::new();
    for (name, single) in runs {
        let parallel = execute(&preset_config(name), 8).expect("preset run");
        for (file, bytes) in &single.files {
            if file.ends_with(".csv") && parallel.file(file) != Some(bytes.as_slice()) {
                differing.push(format!("{name}/{file}"));
            }
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("CSV outputs of {} presets identical with 1 and 8 threads", runs.len())
        } else {
            format!("differs: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs: Vec<(&str, RunOutputs)> = PRESET_NAMES
        .iter()
        .map(|&name| (name, execute(&preset_config(name), 1).expect("preset run")))
        .collect();
    let logged = logged_preset_episodes();

    let criteria: [(&str, Box<dyn Fn() -> Outcome>); 8] = [
        ("1 regret below UCB on all presets", Box::new(|| criterion_regret(&runs))),
        ("2 deterministic hard cap", Box::new(|| criterion_hard_cap(&runs, &logged))),
        ("3 regret identity and replay", Box::new(|| criterion_regret_identity(&runs, &logged))),
        ("4 single-fidelity reduction", Box::new(criterion_single_fidelity)),
        ("5 partition oracle", Box::new(criterion_partition)),
        ("6 fidelity usage", Box::new(|| criterion_usage(&runs))),
        ("7 budget accounting", Box::new(|| criterion_budget(&runs, &logged))),
        ("8 determinism across threads", Box::new(|| criterion_determinism(&runs))),
    ];
    let mut all = true;
    for (name, check) in &criteria {
        let o = check();
        all &= o.passed;
        println!("[{}] criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
