use rayon::prelude::*;
use serde::Serialize;

use super::generator::{generate_instance, instance_rng, GeneratorSpec};
use super::{check_episode, run_episode, EpisodeConfig, EpisodeResult, InvariantViolation};
use crate::model::ProblemInstance;
use crate::policy::PolicyKind;
use crate::{Error, Result, Scalar};

/// Where each replication's instance comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource<T> {
    /// Every replication runs on this instance.
    Fixed(ProblemInstance<T>),
    /// Replication `r` draws its own instance from its derived seed.
    Generated(GeneratorSpec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig<T> {
    pub policies: Vec<PolicyKind>,
    pub capital: T,
    pub rho: T,
    pub checkpoints: Vec<T>,
    pub replications: usize,
    pub base_seed: u64,
    /// Worker threads; results do not depend on it.
    pub parallelism: usize,
}

/// Replication seed: the `index`-th output of a SplitMix64 generator seeded
/// with `base_seed`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeViolation {
    pub policy: PolicyKind,
    pub replication: usize,
    pub seed: u64,
    pub violation: InvariantViolation,
}

/// Aggregates over replications for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary<T> {
    pub policy: PolicyKind,
    pub replications: usize,
    pub checkpoints: Vec<T>,
    pub mean_regret: Vec<T>,
    /// Sample standard deviation (zero for a single replication).
    pub std_regret: Vec<T>,
    pub mean_unused_regret: Vec<T>,
    pub mean_play_regret: Vec<T>,
    /// Arm-major `K × M` mean of `T^(m)_k(N)`.
    pub mean_counts: Vec<T>,
    pub num_arms: usize,
    pub num_fidelities: usize,
    pub mean_plays: T,
}

impl<T: Scalar> PolicySummary<T> {
    pub fn mean_count(&self, arm: usize, fidelity: usize) -> T {
        self.mean_counts[arm * self.num_fidelities + fidelity]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult<T> {
    pub summaries: Vec<PolicySummary<T>>,
    pub replication_seeds: Vec<u64>,
    /// Broken invariants, in (replication, policy) order. Empty on a healthy run.
    pub violations: Vec<EpisodeViolation>,
}

impl<T: Scalar> BatchResult<T> {
    pub fn summary(&self, policy: PolicyKind) -> Option<&PolicySummary<T>> {
        self.summaries.iter().find(|s| s.policy == policy)
    }
}

struct Replication<T> {
    episodes: Vec<EpisodeResult<T>>,
    violations: Vec<EpisodeViolation>,
}

fn run_replication<T: Scalar>(
    source: &InstanceSource<T>,
    config: &BatchConfig<T>,
    replication: usize,
    seed: u64,
) -> Result<Replication<T>> {
    let generated;
    let instance = match source {
        InstanceSource::Fixed(instance) => instance,
        InstanceSource::Generated(spec) => {
            generated = generate_instance(spec, &mut instance_rng(seed))?;
            &generated
        }
    };
    let mut episodes = Vec::with_capacity(config.policies.len());
    let mut violations = Vec::new();
    for &policy in &config.policies {
        let episode = run_episode(
            instance,
            &EpisodeConfig {
                policy,
                capital: config.capital,
                rho: config.rho,
                checkpoints: config.checkpoints.clone(),
                seed,
                record_plays: false,
            },
        )?;
        violations.extend(check_episode(instance, &episode).into_iter().map(|violation| {
            EpisodeViolation {
                policy,
                replication,
                seed,
                violation,
            }
        }));
        episodes.push(episode);
    }
    Ok(Replication { episodes, violations })
}

/// Runs every policy on every replication and aggregates in replication order.
pub fn run_batch<T: Scalar>(source: &InstanceSource<T>, config: &BatchConfig<T>) -> Result<BatchResult<T>> {
    if config.replications == 0 {
        return Err(Error::Config("replications must be ≥ 1".into()));
    }
    if config.policies.is_empty() {
        return Err(Error::Config("at least one policy is required".into()));
    }
    let (num_arms, num_fidelities) = match source {
        InstanceSource::Fixed(i) => (i.num_arms(), i.num_fidelities()),
        InstanceSource::Generated(s) => {
            s.validate()?;
            (s.num_arms, s.ladder.num_fidelities())
        }
    };
    let seeds: Vec<u64> = (0..config.replications as u64)
        .map(|r| derive_seed(config.base_seed, r))
        .collect();

    let work = |(r, &seed): (usize, &u64)| run_replication(source, config, r, seed);
    let replications: Vec<Replication<T>> = if config.parallelism <= 1 {
        seeds.iter().enumerate().map(work).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| seeds.par_iter().enumerate().map(work).collect::<Result<_>>())?
    };

    let n = T::lit(config.replications as f64);
    let cells = num_arms * num_fidelities;
    let summaries = config
        .policies
        .iter()
        .enumerate()
        .map(|(p, &policy)| {
            let episodes: Vec<&EpisodeResult<T>> = replications.iter().map(|r| &r.episodes[p]).collect();
            let per_checkpoint = |f: &dyn Fn(&super::CheckpointRegret<T>) -> T| -> Vec<T> {
                (0..config.checkpoints.len())
                    .map(|j| episodes.iter().fold(T::zero(), |acc, e| acc + f(&e.checkpoints[j])) / n)
                    .collect()
            };
            let mean_regret = per_checkpoint(&|c| c.regret);
            let std_regret = (0..config.checkpoints.len())
                .map(|j| {
                    if config.replications < 2 {
                        return T::zero();
                    }
                    let ss = episodes.iter().fold(T::zero(), |acc, e| {
                        let d = e.checkpoints[j].regret - mean_regret[j];
                        acc + d * d
                    });
                    (ss / (n - T::one())).sqrt()
                })
                .collect();
            let mut mean_counts = vec![T::zero(); cells];
            for e in &episodes {
                for (acc, &c) in mean_counts.iter_mut().zip(&e.counts) {
                    *acc = *acc + T::lit(c as f64);
                }
            }
            for c in &mut mean_counts {
                *c = *c / n;
            }
            PolicySummary {
                policy,
                replications: config.replications,
                checkpoints: config.checkpoints.clone(),
                mean_regret,
                std_regret,
                mean_unused_regret: per_checkpoint(&|c| c.unused_regret),
                mean_play_regret: per_checkpoint(&|c| c.play_regret),
                mean_counts,
                num_arms,
                num_fidelities,
                mean_plays: episodes.iter().fold(T::zero(), |acc, e| acc + T::lit(e.plays as f64)) / n,
            }
        })
        .collect();

    Ok(BatchResult {
        summaries,
        replication_seeds: seeds,
        violations: replications.into_iter().flat_map(|r| r.violations).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FidelityLadder, RewardFamily};
    use crate::sim::HighFidelityMeans;

    fn spec() -> GeneratorSpec<f64> {
        GeneratorSpec {
            num_arms: 12,
            ladder: FidelityLadder::from_f64(&[0.2, 0.0], &[1.0, 10.0]).unwrap(),
            family: RewardFamily::Bernoulli,
            high_fidelity_means: HighFidelityMeans::UniformGrid { lo: 0.1, hi: 0.9 },
            optimal_arm_suppression: false,
        }
    }

    fn config(replications: usize, parallelism: usize) -> BatchConfig<f64> {
        BatchConfig {
            policies: vec![PolicyKind::MfUcb, PolicyKind::Ucb],
            capital: 2000.0,
            rho: 2.0,
            checkpoints: vec![500.0, 1000.0, 2000.0],
            replications,
            base_seed: 99,
            parallelism,
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..100).map(|r| derive_seed(7, r)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_eq!(derive_seed(7, 3), a[3]);
        assert_ne!(derive_seed(8, 3), a[3]);
    }

    #[test]
    fn single_replication_is_the_episode() {
        let src = InstanceSource::Generated(spec());
        let batch = run_batch(&src, &config(1, 1)).unwrap();
        let seed = batch.replication_seeds[0];
        let inst = generate_instance(&spec(), &mut instance_rng(seed)).unwrap();
        let ep = run_episode(
            &inst,
            &EpisodeConfig {
                policy: PolicyKind::MfUcb,
                capital: 2000.0,
                rho: 2.0,
                checkpoints: vec![500.0, 1000.0, 2000.0],
                seed,
                record_plays: false,
            },
        )
        .unwrap();
        let s = batch.summary(PolicyKind::MfUcb).unwrap();
        let regrets: Vec<f64> = ep.checkpoints.iter().map(|c| c.regret).collect();
        assert_eq!(s.mean_regret, regrets);
        assert!(s.std_regret.iter().all(|&x| x == 0.0));
        let counts: Vec<f64> = ep.counts.iter().map(|&c| c as f64).collect();
        assert_eq!(s.mean_counts, counts);
        assert!(batch.violations.is_empty());
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let src = InstanceSource::Generated(spec());
        let a = run_batch(&src, &config(6, 1)).unwrap();
        let b = run_batch(&src, &config(6, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ucb_stays_on_top_fidelity() {
        let inst = generate_instance(&spec(), &mut instance_rng(5)).unwrap();
        let batch = run_batch(&InstanceSource::Fixed(inst), &config(3, 1)).unwrap();
        let s = batch.summary(PolicyKind::Ucb).unwrap();
        for k in 0..12 {
            assert_eq!(s.mean_count(k, 0), 0.0);
        }
    }

    #[test]
    fn zero_replications_rejected() {
        let err = run_batch(&InstanceSource::Generated(spec()), &config(0, 1)).unwrap_err();
        assert_eq!(err, Error::Config("replications must be ≥ 1".into()));
    }
}
