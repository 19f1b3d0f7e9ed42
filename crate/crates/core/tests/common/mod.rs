//! Random instances and brute-force reference implementations shared by
//! integration tests. Oracles work from the set and sum definitions
//! directly and share no code with the library beyond `ψ`/`ψ⁻¹`.
#![allow(dead_code)]

use mfbandit::model::{ConcentrationModel, FidelityLadder, RewardFamily};
use mfbandit::sim::PlayRecord;
use mfbandit::ProblemInstance64;
use rand::Rng;

/// Random Bernoulli instance with `1..=max_arms` arms and `1..=max_fidelities`
/// fidelities. Half of the draws snap values to a coarse grid so that ties
/// and exact threshold hits occur.
pub fn random_bernoulli_instance<R: Rng>(rng: &mut R, max_arms: usize, max_fidelities: usize) -> ProblemInstance64 {
    let coarse = rng.random_bool(0.5);
    let snap = |x: f64| if coarse { (x * 20.0).round() / 20.0 } else { x };
    let num_fidelities = rng.random_range(1..=max_fidelities);
    let num_arms = rng.random_range(1..=max_arms);

    let mut zetas = vec![0.0; num_fidelities];
    for m in (0..num_fidelities - 1).rev() {
        zetas[m] = zetas[m + 1] + snap(rng.random_range(0.05..0.3)).max(0.05);
    }
    let mut costs = vec![1.0; num_fidelities];
    for m in 1..num_fidelities {
        costs[m] = costs[m - 1] * rng.random_range(1.5..20.0_f64).round().max(2.0);
    }

    let means = (0..num_arms)
        .map(|_| {
            let top = snap(rng.random_range(0.0..=1.0));
            let mut row: Vec<f64> = zetas
                .iter()
                .map(|&z| {
                    let mut mu = snap((top + rng.random_range(-1.0..=1.0) * z).clamp(0.0, 1.0));
                    if (top - mu).abs() > z {
                        mu = top;
                    }
                    mu
                })
                .collect();
            row[num_fidelities - 1] = top;
            row
        })
        .collect();
    let ladder = FidelityLadder::new(zetas, costs).unwrap();
    ProblemInstance64::new(ladder, RewardFamily::Bernoulli, means).unwrap()
}

/// Random single-fidelity instance, Gaussian or Bernoulli, with up to `max_arms` arms.
pub fn random_single_fidelity_instance<R: Rng>(rng: &mut R, max_arms: usize) -> ProblemInstance64 {
    let num_arms = rng.random_range(1..=max_arms);
    let ladder = FidelityLadder::single(rng.random_range(0.5..5.0)).unwrap();
    if rng.random_bool(0.5) {
        let means = (0..num_arms).map(|_| vec![rng.random_range(0.0..=1.0)]).collect();
        ProblemInstance64::new(ladder, RewardFamily::Bernoulli, means).unwrap()
    } else {
        let sigma = rng.random_range(0.1..2.0);
        let means = (0..num_arms).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        ProblemInstance64::new(ladder, RewardFamily::Gaussian { sigma }, means).unwrap()
    }
}

/// Partition built from the set definitions, arm indices zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePartition {
    pub optimal: Vec<usize>,
    /// `K^(m)` for every fidelity including the top.
    pub sets: Vec<Vec<usize>>,
    pub first_kind: Vec<Vec<usize>>,
    pub second_kind: Vec<Vec<usize>>,
    /// `(arm, L(m,k))` for every arm of some `K^(m,2)`, by arm.
    pub candidates: Vec<(usize, Vec<usize>)>,
}

pub fn oracle_gap(inst: &ProblemInstance64, k: usize, m: usize) -> f64 {
    let mu_star = (0..inst.num_arms())
        .map(|j| inst.arm_means(j)[inst.num_fidelities() - 1])
        .fold(f64::NEG_INFINITY, f64::max);
    mu_star - inst.arm_means(k)[m] - inst.ladder().zetas()[m]
}

pub fn oracle_gamma(inst: &ProblemInstance64, model: &ConcentrationModel<f64>, m: usize) -> f64 {
    let costs = inst.ladder().costs();
    let zeta = inst.ladder().zetas()[m];
    model.psi_inv(costs[m] / costs[m + 1] * model.psi(zeta).unwrap()).unwrap()
}

pub fn oracle_partition(inst: &ProblemInstance64) -> OraclePartition {
    let model = inst.concentration();
    let num_fidelities = inst.num_fidelities();
    let top = num_fidelities - 1;
    let arms = 0..inst.num_arms();
    let mu_star = arms
        .clone()
        .map(|k| inst.arm_means(k)[top])
        .fold(f64::NEG_INFINITY, f64::max);
    let optimal: Vec<usize> = arms.clone().filter(|&k| inst.arm_means(k)[top] == mu_star).collect();
    let gap = |k, m| oracle_gap(inst, k, m);
    let gamma = |m| oracle_gamma(inst, &model, m);
    let cleared = |k: usize, m: usize| gap(k, m) > 2.0 * gamma(m);

    let mut sets = Vec::new();
    for m in 0..top {
        sets.push(
            arms.clone()
                .filter(|k| !optimal.contains(k))
                .filter(|&k| cleared(k, m) && (0..m).all(|l| !cleared(k, l)))
                .collect::<Vec<_>>(),
        );
    }
    sets.push(
        arms.clone()
            .filter(|k| !optimal.contains(k))
            .filter(|&k| (0..top).all(|l| !cleared(k, l)))
            .collect(),
    );

    let mut first_kind = Vec::new();
    let mut second_kind = Vec::new();
    let mut candidates = Vec::new();
    for (m, set) in sets.iter().enumerate() {
        let (first, second): (Vec<usize>, Vec<usize>) =
            set.iter().partition(|&&k| (0..m).all(|l| gap(k, l) <= 0.0));
        for &k in &second {
            let mut l_set: Vec<usize> = (0..m).filter(|&l| gap(k, l) > 0.0).collect();
            l_set.push(m);
            candidates.push((k, l_set));
        }
        first_kind.push(first);
        second_kind.push(second);
    }
    candidates.sort();
    OraclePartition {
        optimal,
        sets,
        first_kind,
        second_kind,
        candidates,
    }
}

/// Unscaled lower-bound sum per fidelity, by enumeration over the oracle partition.
pub fn oracle_lower_raw(inst: &ProblemInstance64) -> Vec<f64> {
    let p = oracle_partition(inst);
    let costs = inst.ladder().costs();
    let top = inst.num_fidelities() - 1;
    let gap = |k, m| oracle_gap(inst, k, m);
    (0..=top)
        .map(|m| {
            let first: f64 = p.first_kind[m]
                .iter()
                .map(|&k| gap(k, top) * costs[m] / (gap(k, m) * gap(k, m)))
                .sum();
            let second: f64 = p.second_kind[m]
                .iter()
                .map(|&k| {
                    let l_set = &p.candidates.iter().find(|(a, _)| *a == k).unwrap().1;
                    let best = l_set
                        .iter()
                        .map(|&l| costs[l] / (gap(k, l) * gap(k, l)))
                        .fold(f64::INFINITY, f64::min);
                    gap(k, top) * best
                })
                .sum();
            first + second
        })
        .collect()
}

/// Regret terms recomputed from a play log for the prefix that fits in `capital`:
/// `(plays, spent, R, r̃, R̃)`.
pub fn replay(inst: &ProblemInstance64, log: &[PlayRecord<f64>], capital: f64) -> (u64, f64, f64, f64, f64) {
    let top = inst.num_fidelities() - 1;
    let mu_star = (0..inst.num_arms())
        .map(|k| inst.arm_means(k)[top])
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut plays, mut spent, mut credited, mut play_regret) = (0u64, 0.0, 0.0, 0.0);
    for p in log {
        let cost = inst.ladder().costs()[p.fidelity];
        if spent + cost > capital {
            break;
        }
        plays += 1;
        spent += cost;
        credited += cost * inst.arm_means(p.arm)[top];
        play_regret += cost * (mu_star - inst.arm_means(p.arm)[top]);
    }
    let unused = (capital - spent) * mu_star;
    (plays, spent, capital * mu_star - credited, unused, play_regret)
}
