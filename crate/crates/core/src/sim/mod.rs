//! Capital-budgeted episodes and regret accounting.
//!
//! An episode repeatedly asks the policy for a decision and executes it
//! while the capital allows. The policy does not know the budget; the first
//! decision that would overspend ends the episode and is not executed, so the
//! number of plays `N` is the largest `n` with `Σ_{t≤n} λ^(m_t) ≤ Λ`.
//!
//! Regret at capital `Λ_j` over the prefix of `N_j` plays that fits in `Λ_j`:
//!
//! ```text
//! R  = Λ_j μ_* − Σ_{t≤N_j} λ^(m_t) μ^(M)_{I_t}
//! r̃  = (Λ_j − Σ_{t≤N_j} λ^(m_t)) μ_*              unused capital
//! R̃  = Σ_{t≤N_j} λ^(m_t) (μ_* − μ^(M)_{I_t})       cost-weighted pseudo-regret
//! ```
//!
//! Every play is credited with the top-fidelity mean of its arm whatever
//! fidelity it was played at.

mod batch;
mod generator;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

pub use batch::{
    derive_seed, run_batch, BatchConfig, BatchResult, EpisodeViolation, InstanceSource, PolicySummary,
};
pub use generator::{generate_instance, instance_rng, GeneratorSpec, HighFidelityMeans, BERNOULLI_CLAMP};

use crate::model::{ProblemInstance, RewardFamily};
use crate::policy::{fidelity_play_cap, PolicyKind, PolicyState, StepDecision};
use crate::{Error, Result, Scalar};

/// Relative tolerance of the `R = r̃ + R̃` identity at double precision.
pub const REGRET_IDENTITY_TOLERANCE: f64 = 1e-9;

/// Draws one reward for `arm` at `fidelity`.
pub fn sample_reward<T: Scalar, R: Rng + ?Sized>(
    instance: &ProblemInstance<T>,
    arm: usize,
    fidelity: usize,
    rng: &mut R,
) -> T {
    let mean = instance.mean(arm, fidelity);
    match *instance.family() {
        RewardFamily::Gaussian { sigma } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + sigma * T::lit(z)
        }
        RewardFamily::Bernoulli => {
            if rng.random::<f64>() < mean.as_f64() {
                T::one()
            } else {
                T::zero()
            }
        }
    }
}

/// One executed play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlayRecord<T> {
    pub t: u64,
    pub arm: usize,
    pub fidelity: usize,
    pub reward: T,
    pub cost: T,
    /// Top-fidelity mean of the played arm.
    pub credited_mean: T,
}

/// Regret decomposition at one capital checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointRegret<T> {
    pub capital: T,
    /// Plays in the prefix that fits within `capital`.
    pub plays: u64,
    pub spent: T,
    pub regret: T,
    /// `r̃`: regret charged for unused capital.
    pub unused_regret: T,
    /// `R̃`: cost-weighted instantaneous regret of the executed plays.
    pub play_regret: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig<T> {
    pub policy: PolicyKind,
    pub capital: T,
    pub rho: T,
    /// Ascending capitals, each at most `capital`.
    pub checkpoints: Vec<T>,
    pub seed: u64,
    /// Keep the full play log (memory grows with the number of plays).
    pub record_plays: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult<T> {
    pub policy: PolicyKind,
    pub seed: u64,
    pub capital: T,
    pub rho: T,
    /// `N`.
    pub plays: u64,
    pub spent: T,
    pub num_arms: usize,
    pub num_fidelities: usize,
    /// Arm-major `T^(m)_k(N)`.
    pub counts: Vec<u64>,
    pub checkpoints: Vec<CheckpointRegret<T>>,
    /// The decision that would have overspent, if the budget ended the episode.
    pub refused: Option<StepDecision>,
    pub ledger: Option<Vec<PlayRecord<T>>>,
}

impl<T: Scalar> EpisodeResult<T> {
    pub fn count(&self, arm: usize, fidelity: usize) -> u64 {
        self.counts[arm * self.num_fidelities + fidelity]
    }

    /// Plays of `arm` summed over all fidelities.
    pub fn arm_plays(&self, arm: usize) -> u64 {
        self.counts[arm * self.num_fidelities..(arm + 1) * self.num_fidelities]
            .iter()
            .sum()
    }

    pub fn final_checkpoint(&self) -> Option<&CheckpointRegret<T>> {
        self.checkpoints.last()
    }
}

fn check_checkpoints<T: Scalar>(capital: T, checkpoints: &[T]) -> Result<()> {
    if !(capital > T::zero()) || !capital.is_finite() {
        return Err(Error::Config(format!("capital must be positive and finite, got {capital}")));
    }
    for (i, &c) in checkpoints.iter().enumerate() {
        if !(c >= T::zero()) || c > capital {
            return Err(Error::Config(format!(
                "checkpoint {c} outside [0, {capital}]"
            )));
        }
        if i > 0 && c < checkpoints[i - 1] {
            return Err(Error::Config("checkpoints must be ascending".into()));
        }
    }
    Ok(())
}

struct Accumulator<T> {
    spent: T,
    credited: T,
    play_regret: T,
    plays: u64,
}

impl<T: Scalar> Accumulator<T> {
    fn snapshot(&self, capital: T, mu_star: T) -> CheckpointRegret<T> {
        CheckpointRegret {
            capital,
            plays: self.plays,
            spent: self.spent,
            regret: capital * mu_star - self.credited,
            unused_regret: (capital - self.spent) * mu_star,
            play_regret: self.play_regret,
        }
    }
}

/// Runs one policy on one instance until the capital is exhausted.
pub fn run_episode<T: Scalar>(
    instance: &ProblemInstance<T>,
    config: &EpisodeConfig<T>,
) -> Result<EpisodeResult<T>> {
    check_checkpoints(config.capital, &config.checkpoints)?;
    if !(config.rho > T::zero()) {
        return Err(Error::Config(format!("rho must be positive, got {}", config.rho)));
    }
    let ladder = instance.ladder();
    let model = instance.concentration();
    let mu_star = instance.mu_star();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = PolicyState::new(instance.num_arms(), ladder.num_fidelities(), config.rho);
    let mut acc = Accumulator {
        spent: T::zero(),
        credited: T::zero(),
        play_regret: T::zero(),
        plays: 0,
    };
    let mut checkpoints = Vec::with_capacity(config.checkpoints.len());
    let mut pending = config.checkpoints.iter().copied().peekable();
    let mut ledger = config.record_plays.then(Vec::new);

    let refused = loop {
        let decision = config.policy.select(&state, &model, ladder);
        let cost = ladder.cost(decision.fidelity);
        let after = acc.spent + cost;
        // Close every checkpoint this play would overshoot.
        while let Some(&c) = pending.peek() {
            if after > c {
                checkpoints.push(acc.snapshot(c, mu_star));
                pending.next();
            } else {
                break;
            }
        }
        if after > config.capital {
            break Some(decision);
        }
        let reward = sample_reward(instance, decision.arm, decision.fidelity, &mut rng);
        let credited_mean = instance.target_mean(decision.arm);
        state.update(decision, reward)?;
        acc.spent = after;
        acc.credited = acc.credited + cost * credited_mean;
        acc.play_regret = acc.play_regret + cost * (mu_star - credited_mean);
        acc.plays += 1;
        if let Some(log) = ledger.as_mut() {
            log.push(PlayRecord {
                t: acc.plays,
                arm: decision.arm,
                fidelity: decision.fidelity,
                reward,
                cost,
                credited_mean,
            });
        }
    };
    for c in pending {
        checkpoints.push(acc.snapshot(c, mu_star));
    }

    Ok(EpisodeResult {
        policy: config.policy,
        seed: config.seed,
        capital: config.capital,
        rho: config.rho,
        plays: acc.plays,
        spent: acc.spent,
        num_arms: instance.num_arms(),
        num_fidelities: ladder.num_fidelities(),
        counts: state.counts().to_vec(),
        checkpoints,
        refused,
        ledger,
    })
}

/// A broken simulation invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantViolation {
    pub invariant: &'static str,
    pub detail: String,
}

impl std::fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

/// Checks budget safety, play-count consistency, the regret identity and,
/// for multi-fidelity UCB, the per-fidelity play cap.
pub fn check_episode<T: Scalar>(
    instance: &ProblemInstance<T>,
    result: &EpisodeResult<T>,
) -> Vec<InvariantViolation> {
    let mut out = Vec::new();
    let ladder = instance.ladder();
    let capital = result.capital;
    let mut fail = |invariant: &'static str, detail: String| {
        out.push(InvariantViolation { invariant, detail })
    };

    if result.spent > capital {
        fail("budget", format!("spent {} exceeds capital {}", result.spent, capital));
    }
    if let Some(d) = result.refused {
        if !(result.spent + ladder.cost(d.fidelity) > capital) {
            fail("budget", format!("decision {d:?} was refused although it fits"));
        }
    }
    let lo = (capital / ladder.top_cost()).floor().as_f64() as u64;
    let hi = (capital / ladder.cost(0)).floor().as_f64() as u64;
    if result.plays < lo || result.plays > hi {
        fail("play range", format!("N = {} outside [{lo}, {hi}]", result.plays));
    }
    let total: u64 = result.counts.iter().sum();
    if total != result.plays {
        fail("play counts", format!("counts sum to {total} but N = {}", result.plays));
    }
    if let Some(log) = &result.ledger {
        if log.len() as u64 != result.plays {
            fail("play counts", format!("ledger has {} plays, N = {}", log.len(), result.plays));
        }
    }
    // Scalars coarser than f64 also get a worst-case rounding allowance for
    // summing N costs of size up to Λμ_*; for f64 the extra term vanishes.
    let excess_eps = (T::epsilon() - T::lit(f64::EPSILON)).max(T::zero());
    for c in &result.checkpoints {
        let tol = T::lit(REGRET_IDENTITY_TOLERANCE) * T::one().max(c.regret.abs())
            + excess_eps * T::lit(c.plays as f64) * (c.capital * instance.mu_star()).abs();
        if (c.regret - (c.unused_regret + c.play_regret)).abs() > tol {
            fail(
                "regret identity",
                format!(
                    "at capital {}: R = {} but r~ + R~ = {}",
                    c.capital,
                    c.regret,
                    c.unused_regret + c.play_regret
                ),
            );
        }
    }
    if result.policy == PolicyKind::MfUcb && result.plays > 0 {
        let model = instance.concentration();
        for m in 0..ladder.top() {
            let cap = fidelity_play_cap(ladder, &model, result.rho, m, result.plays)
                .expect("fidelity below top");
            for k in 0..result.num_arms {
                let n = result.count(k, m);
                if n > cap {
                    fail(
                        "fidelity cap",
                        format!("arm {} played {n} times at fidelity {} (cap {cap})", k + 1, m + 1),
                    );
                }
            }
        }
    }
    out
}

/// `count` capitals log-spaced from `start` to `end` inclusive.
pub fn log_checkpoints<T: Scalar>(start: T, end: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![end],
        _ => {
            let start = start.min(end);
            let ratio = (end / start).ln();
            let last = T::lit((count - 1) as f64);
            let mut grid: Vec<T> = (0..count)
                .map(|j| start * (ratio * T::lit(j as f64) / last).exp())
                .collect();
            // exp/ln rounding must not push the grid past the budget.
            grid[count - 1] = end;
            for j in 1..count {
                grid[j] = grid[j].max(grid[j - 1]).min(end);
            }
            grid
        }
    }
}

/// Default grid: `count` log-spaced capitals from `50 λ^(M)` (or the budget,
/// if smaller) to the budget.
pub fn default_checkpoints<T: Scalar>(instance_top_cost: T, capital: T, count: usize) -> Vec<T> {
    log_checkpoints(T::lit(50.0) * instance_top_cost, capital, count)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::model::FidelityLadder;

    fn two_fidelity() -> ProblemInstance<f64> {
        let ladder = FidelityLadder::from_f64(&[0.2, 0.0], &[1.0, 10.0]).unwrap();
        ProblemInstance::new(
            ladder,
            RewardFamily::Bernoulli,
            vec![vec![0.5, 0.4], vec![0.7, 0.8]],
        )
        .unwrap()
    }

    fn config(policy: PolicyKind, capital: f64, checkpoints: Vec<f64>, seed: u64) -> EpisodeConfig<f64> {
        EpisodeConfig {
            policy,
            capital,
            rho: 2.0,
            checkpoints,
            seed,
            record_plays: true,
        }
    }

    #[test]
    fn degenerate_bernoulli_means() {
        let ladder = FidelityLadder::<f64>::single(1.0).unwrap();
        let inst = ProblemInstance::new(ladder, RewardFamily::Bernoulli, vec![vec![1.0], vec![0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_reward(&inst, 0, 0, &mut rng), 1.0);
            assert_eq!(sample_reward(&inst, 1, 0, &mut rng), 0.0);
        }
    }

    #[test]
    fn sample_means_concentrate() {
        let ladder = FidelityLadder::<f64>::single(1.0).unwrap();
        let inst = ProblemInstance::new(ladder.clone(), RewardFamily::Bernoulli, vec![vec![0.3]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| sample_reward(&inst, 0, 0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.3).abs() < 0.01, "{mean}");

        let inst = ProblemInstance::new(ladder, RewardFamily::Gaussian { sigma: 0.2 }, vec![vec![0.0]]).unwrap();
        let mean: f64 = (0..n).map(|_| sample_reward(&inst, 0, 0, &mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.003, "{mean}");
    }

    #[test]
    fn budget_below_cheapest_play() {
        let inst = two_fidelity();
        let r = run_episode(&inst, &config(PolicyKind::MfUcb, 0.5, vec![0.5], 3)).unwrap();
        assert_eq!(r.plays, 0);
        let c = r.checkpoints[0];
        assert_eq!(c.regret, 0.5 * 0.8);
        assert_eq!(c.play_regret, 0.0);
        assert!(check_episode(&inst, &r).is_empty());
    }

    #[test]
    fn single_arm_single_fidelity() {
        let ladder = FidelityLadder::<f64>::single(3.0).unwrap();
        let inst = ProblemInstance::new(ladder, RewardFamily::Gaussian { sigma: 1.0 }, vec![vec![0.25]]).unwrap();
        for policy in [PolicyKind::MfUcb, PolicyKind::Ucb] {
            let r = run_episode(&inst, &config(policy, 100.0, vec![100.0], 9)).unwrap();
            assert_eq!(r.plays, 33);
            let c = r.checkpoints[0];
            assert_eq!(c.play_regret, 0.0);
            assert_relative_eq!(c.unused_regret, (100.0 - 99.0) * 0.25, max_relative = 1e-12);
            assert_relative_eq!(c.regret, c.unused_regret, max_relative = 1e-12);
        }
    }

    #[test]
    fn replay_oracle_matches_checkpoints() {
        let inst = two_fidelity();
        let checkpoints = vec![5.0, 12.5, 30.0, 50.0];
        let r = run_episode(&inst, &config(PolicyKind::MfUcb, 50.0, checkpoints.clone(), 42)).unwrap();
        let log = r.ledger.as_ref().unwrap();
        for (cp, &cap) in r.checkpoints.iter().zip(&checkpoints) {
            let mut spent = 0.0;
            let mut credited = 0.0;
            let mut n = 0;
            for p in log {
                if spent + p.cost > cap {
                    break;
                }
                spent += p.cost;
                credited += p.cost * inst.target_mean(p.arm);
                n += 1;
            }
            assert_eq!(cp.plays, n);
            assert_relative_eq!(cp.regret, cap * inst.mu_star() - credited, max_relative = 1e-12);
        }
        assert!(check_episode(&inst, &r).is_empty());
    }

    #[test]
    fn same_seed_same_result() {
        let inst = two_fidelity();
        let a = run_episode(&inst, &config(PolicyKind::MfUcb, 200.0, vec![100.0, 200.0], 5)).unwrap();
        let b = run_episode(&inst, &config(PolicyKind::MfUcb, 200.0, vec![100.0, 200.0], 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_checkpoints() {
        let inst = two_fidelity();
        assert!(run_episode(&inst, &config(PolicyKind::Ucb, 10.0, vec![20.0], 0)).is_err());
        assert!(run_episode(&inst, &config(PolicyKind::Ucb, 10.0, vec![5.0, 2.0], 0)).is_err());
        assert!(run_episode(&inst, &config(PolicyKind::Ucb, 0.0, vec![], 0)).is_err());
    }

    #[test]
    fn log_grid() {
        let g = log_checkpoints(10.0, 1000.0, 3);
        assert_relative_eq!(g[0], 10.0);
        assert_relative_eq!(g[1], 100.0, max_relative = 1e-12);
        assert_eq!(g[2], 1000.0);
        assert_eq!(log_checkpoints(10.0, 1000.0, 1), vec![1000.0]);
        let g = default_checkpoints(1000.0, 2.0e6, 20);
        assert_eq!(g.len(), 20);
        assert_relative_eq!(g[0], 50_000.0, max_relative = 1e-12);
        assert!(g.windows(2).all(|w| w[0] <= w[1]));
        // Budget smaller than the default start collapses onto the budget.
        assert!(default_checkpoints(10.0, 100.0, 4).iter().all(|&c| c == 100.0));
    }
}
