//! Instance diagnostics: arm partitions by the fidelity that can rule an arm
//! out, and the problem-dependent coefficients of the `log Λ` regret bounds.
//!
//! Reports use zero-based arm and fidelity indices like the rest of the
//! library.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::model::{gamma, gaps, ConcentrationModel, GapMatrix, ProblemInstance, RewardFamily};
use crate::sim::PolicySummary;
use crate::{report_float, Error, Result, Scalar};

/// Partition an arm belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArmLabel {
    /// `k ∈ K^(m)` (zero-based `m`).
    Fidelity(usize),
    /// `k ∈ K^*`.
    Optimal,
}

impl ArmLabel {
    pub fn fidelity(self) -> Option<usize> {
        match self {
            ArmLabel::Fidelity(m) => Some(m),
            ArmLabel::Optimal => None,
        }
    }
}

/// One-based fidelity number, or `optimal`.
impl fmt::Display for ArmLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArmLabel::Fidelity(m) => write!(f, "{}", m + 1),
            ArmLabel::Optimal => f.write_str("optimal"),
        }
    }
}

impl Serialize for ArmLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct PartitionReport<T> {
    /// `[k]` per arm.
    pub labels: Vec<ArmLabel>,
    /// `K^(m)` for every fidelity, ascending arm indices.
    pub sets: Vec<Vec<usize>>,
    pub optimal: Vec<usize>,
    /// `γ^(m)` for fidelities below the top.
    #[serde(serialize_with = "report_float::vec::serialize")]
    pub gammas: Vec<T>,
    /// `K^(m,1)`: arms of `K^(m)` with `Δ^(ℓ)_k ≤ 0` for every `ℓ < m`.
    pub first_kind: Vec<Vec<usize>>,
    /// `K^(m,2) = K^(m) \ K^(m,1)`.
    pub second_kind: Vec<Vec<usize>>,
    /// `L(m,k) = {ℓ < m : Δ^(ℓ)_k > 0} ∪ {m}` for arms in some `K^(m,2)`.
    pub candidates: Vec<Option<Vec<usize>>>,
}

impl<T> PartitionReport<T> {
    pub fn num_arms(&self) -> usize {
        self.labels.len()
    }

    pub fn num_fidelities(&self) -> usize {
        self.sets.len()
    }
}

/// Assigns each arm to the lowest fidelity `m` with `Δ^(m)_k > 2γ^(m)`
/// (all lower fidelities having `Δ^(ℓ)_k ≤ 2γ^(ℓ)`); suboptimal arms that
/// never clear a threshold land in the top partition.
pub fn partition_arms<T: Scalar>(
    instance: &ProblemInstance<T>,
    model: &ConcentrationModel<T>,
) -> PartitionReport<T> {
    let ladder = instance.ladder();
    let top = ladder.top();
    let deltas = gaps(instance);
    let gammas: Vec<T> = (0..top)
        .map(|m| gamma(ladder, model, m).expect("below top"))
        .collect();
    let two = T::lit(2.0);

    let k_arms = instance.num_arms();
    let mut labels = Vec::with_capacity(k_arms);
    let mut sets = vec![Vec::new(); top + 1];
    let mut first_kind = vec![Vec::new(); top + 1];
    let mut second_kind = vec![Vec::new(); top + 1];
    let mut candidates = vec![None; k_arms];
    let mut optimal = Vec::new();

    for k in 0..k_arms {
        if instance.is_optimal(k) {
            labels.push(ArmLabel::Optimal);
            optimal.push(k);
            continue;
        }
        let m = (0..top)
            .find(|&m| deltas.get(k, m) > two * gammas[m])
            .unwrap_or(top);
        labels.push(ArmLabel::Fidelity(m));
        sets[m].push(k);
        let positive: Vec<usize> = (0..m).filter(|&l| deltas.get(k, l) > T::zero()).collect();
        if positive.is_empty() {
            first_kind[m].push(k);
        } else {
            second_kind[m].push(k);
            let mut l = positive;
            l.push(m);
            candidates[k] = Some(l);
        }
    }

    PartitionReport {
        labels,
        sets,
        optimal,
        gammas,
        first_kind,
        second_kind,
        candidates,
    }
}

/// `κ_ρ = 1 + ν/2 + Mν/(ρ − 2)`, infinite for `ρ ≤ 2`.
pub fn kappa_rho<T: Scalar>(model: &ConcentrationModel<T>, num_fidelities: usize, rho: T) -> T {
    let two = T::lit(2.0);
    if rho <= two {
        return T::infinity();
    }
    let nu = model.nu;
    T::one() + nu / two + T::lit(num_fidelities as f64) * nu / (rho - two)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct ArmContribution<T> {
    pub arm: usize,
    pub label: ArmLabel,
    #[serde(serialize_with = "report_float::serialize")]
    pub upper: T,
    #[serde(serialize_with = "report_float::serialize")]
    pub lower_raw: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct UpperBound<T> {
    /// `Σ_{k∉K^*} Δ^(M)_k λ^([k]) / ψ(Δ^([k])_k / 2)`.
    #[serde(serialize_with = "report_float::serialize")]
    pub coefficient: T,
    #[serde(serialize_with = "report_float::vec::serialize")]
    pub per_arm: Vec<T>,
}

/// Coefficient of `log Λ` in the multi-fidelity UCB regret bound, with the
/// `ψ(Δ/2)` denominators of the per-arm play-count bound.
pub fn upper_bound_coefficient<T: Scalar>(
    instance: &ProblemInstance<T>,
    model: &ConcentrationModel<T>,
) -> UpperBound<T> {
    let partition = partition_arms(instance, model);
    let deltas = gaps(instance);
    upper_from(instance, model, &partition, &deltas)
}

fn upper_from<T: Scalar>(
    instance: &ProblemInstance<T>,
    model: &ConcentrationModel<T>,
    partition: &PartitionReport<T>,
    deltas: &GapMatrix<T>,
) -> UpperBound<T> {
    let top = instance.ladder().top();
    let two = T::lit(2.0);
    let per_arm: Vec<T> = partition
        .labels
        .iter()
        .enumerate()
        .map(|(k, label)| match *label {
            ArmLabel::Optimal => T::zero(),
            ArmLabel::Fidelity(m) => {
                let half_gap = deltas.get(k, m) / two;
                deltas.get(k, top) * instance.ladder().cost(m) / model.psi_unchecked(half_gap)
            }
        })
        .collect();
    UpperBound {
        coefficient: per_arm.iter().fold(T::zero(), |a, &b| a + b),
        per_arm,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct LowerBound<T> {
    /// Bracketed sum per fidelity, before constants.
    #[serde(serialize_with = "report_float::vec::serialize")]
    pub raw_per_fidelity: Vec<T>,
    #[serde(serialize_with = "report_float::serialize")]
    pub raw: T,
    /// `c_p = c'_p / 4` per fidelity.
    #[serde(serialize_with = "report_float::vec::serialize")]
    pub constants: Vec<T>,
    #[serde(serialize_with = "report_float::serialize")]
    pub min_constant: T,
    /// `Σ_p c_p · raw_p`.
    #[serde(serialize_with = "report_float::serialize")]
    pub scaled: T,
    #[serde(serialize_with = "report_float::vec::serialize")]
    pub per_arm: Vec<T>,
    /// Bernoulli rewards with `μ_* ∈ (1/2, 1)` and `ζ^(1) < 1/2`.
    pub hypotheses_met: bool,
    pub notes: Vec<String>,
}

/// `c'_p / 4` with `c'_p = (1/(M−p)) min_{ℓ>p} (μ_* − ζ^(ℓ))(1 − μ_* + ζ^(ℓ))`
/// (one-based `p`). The top fidelity has no `ℓ > p`; it uses the `ℓ = M`
/// term with unit weight, `μ_*(1 − μ_*)`. Negative values (possible only
/// outside the hypotheses) are clamped to zero.
fn lower_constants<T: Scalar>(instance: &ProblemInstance<T>) -> Vec<T> {
    let ladder = instance.ladder();
    let top = ladder.top();
    let mu = instance.mu_star();
    let term = |l: usize| (mu - ladder.zeta(l)) * (T::one() - mu + ladder.zeta(l));
    let four = T::lit(4.0);
    (0..=top)
        .map(|p| {
            let c_prime = if p == top {
                term(top)
            } else {
                let min = (p + 1..=top).map(term).fold(T::infinity(), T::min);
                min / T::lit((top - p) as f64)
            };
            c_prime.max(T::zero()) / four
        })
        .collect()
}

/// Lower-bound sum over partitions, with squared-gap denominators.
pub fn lower_bound_coefficient<T: Scalar>(instance: &ProblemInstance<T>) -> LowerBound<T> {
    let model = instance.concentration();
    let partition = partition_arms(instance, &model);
    let deltas = gaps(instance);
    lower_from(instance, &partition, &deltas)
}

fn lower_from<T: Scalar>(
    instance: &ProblemInstance<T>,
    partition: &PartitionReport<T>,
    deltas: &GapMatrix<T>,
) -> LowerBound<T> {
    let ladder = instance.ladder();
    let top = ladder.top();
    let mut per_arm = vec![T::zero(); instance.num_arms()];
    let mut raw_per_fidelity = vec![T::zero(); top + 1];
    for m in 0..=top {
        for &k in &partition.first_kind[m] {
            let d = deltas.get(k, m);
            per_arm[k] = deltas.get(k, top) * ladder.cost(m) / (d * d);
        }
        for &k in &partition.second_kind[m] {
            let l_set = partition.candidates[k].as_ref().expect("second-kind arms have candidates");
            let best = l_set
                .iter()
                .map(|&l| {
                    let d = deltas.get(k, l);
                    ladder.cost(l) / (d * d)
                })
                .fold(T::infinity(), T::min);
            per_arm[k] = deltas.get(k, top) * best;
        }
        raw_per_fidelity[m] = partition.sets[m].iter().fold(T::zero(), |a, &k| a + per_arm[k]);
    }
    let constants = lower_constants(instance);
    let scaled = raw_per_fidelity
        .iter()
        .zip(&constants)
        .fold(T::zero(), |a, (&r, &c)| a + r * c);

    let mut notes = Vec::new();
    let half = T::lit(0.5);
    if *instance.family() != RewardFamily::Bernoulli {
        notes.push("rewards are not Bernoulli; squared-gap denominators used as the quadratic-rate analogue".into());
    }
    let mu = instance.mu_star();
    if !(mu > half && mu < T::one()) {
        notes.push(format!("optimal mean {mu} outside (1/2, 1)"));
    }
    if !(ladder.zeta(0) < half) {
        notes.push(format!("lowest-fidelity zeta {} is not below 1/2", ladder.zeta(0)));
    }

    LowerBound {
        raw: raw_per_fidelity.iter().fold(T::zero(), |a, &b| a + b),
        raw_per_fidelity,
        min_constant: constants.iter().copied().fold(T::infinity(), T::min),
        constants,
        scaled,
        per_arm,
        hypotheses_met: notes.is_empty(),
        notes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct BoundReport<T> {
    #[serde(serialize_with = "report_float::serialize")]
    pub upper_coefficient: T,
    #[serde(serialize_with = "report_float::serialize")]
    pub lower_coefficient: T,
    #[serde(serialize_with = "report_float::serialize")]
    pub lower_raw: T,
    #[serde(serialize_with = "report_float::serialize")]
    pub kappa_rho: T,
    #[serde(serialize_with = "report_float::serialize")]
    pub rho: T,
    pub upper_denominator: &'static str,
    pub lower: LowerBound<T>,
    pub per_arm: Vec<ArmContribution<T>>,
}

/// Both bound coefficients and `κ_ρ` for one instance.
pub fn bound_report<T: Scalar>(
    instance: &ProblemInstance<T>,
    model: &ConcentrationModel<T>,
    rho: T,
) -> BoundReport<T> {
    let partition = partition_arms(instance, model);
    let deltas = gaps(instance);
    let upper = upper_from(instance, model, &partition, &deltas);
    let lower = lower_from(instance, &partition, &deltas);
    let per_arm = (0..instance.num_arms())
        .map(|k| ArmContribution {
            arm: k,
            label: partition.labels[k],
            upper: upper.per_arm[k],
            lower_raw: lower.per_arm[k],
        })
        .collect();
    BoundReport {
        upper_coefficient: upper.coefficient,
        lower_coefficient: lower.scaled,
        lower_raw: lower.raw,
        kappa_rho: kappa_rho(model, instance.num_fidelities(), rho),
        rho,
        upper_denominator: "psi(gap/2)",
        lower,
        per_arm,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct UsageRow<T> {
    pub arm: usize,
    pub label: ArmLabel,
    #[serde(serialize_with = "report_float::vec::serialize")]
    pub mean_counts: Vec<T>,
    /// Mean plays at fidelities above the arm's partition; `None` for optimal arms.
    pub mean_above_partition: Option<T>,
}

/// Joins mean play counts of a batch with partition labels.
pub fn fidelity_usage_report<T: Scalar>(
    summary: &PolicySummary<T>,
    partition: &PartitionReport<T>,
) -> Result<Vec<UsageRow<T>>> {
    if summary.num_arms != partition.num_arms() || summary.num_fidelities != partition.num_fidelities() {
        return Err(Error::Mismatch(format!(
            "batch has {} arms x {} fidelities, partition has {} x {}",
            summary.num_arms,
            summary.num_fidelities,
            partition.num_arms(),
            partition.num_fidelities()
        )));
    }
    Ok((0..summary.num_arms)
        .map(|k| {
            let mean_counts: Vec<T> = (0..summary.num_fidelities)
                .map(|m| summary.mean_count(k, m))
                .collect();
            let label = partition.labels[k];
            let mean_above_partition = label
                .fidelity()
                .map(|m| mean_counts[m + 1..].iter().fold(T::zero(), |a, &b| a + b));
            UsageRow {
                arm: k,
                label,
                mean_counts,
                mean_above_partition,
            }
        })
        .collect())
}
