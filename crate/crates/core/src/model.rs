//! Problem description: fidelity ladders, reward families, concentration
//! rates and suboptimality gaps.
//!
//! Indices are zero-based throughout the library: arm `k ∈ 0..K`, fidelity
//! `m ∈ 0..M`, with `M - 1` the top (target) fidelity. Human-facing output
//! (messages, CSV files) converts to one-based indices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{report_float, Error, Result, Scalar};

/// Something wrong with a ladder or instance, with one-based indices in its
/// rendered form.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoFidelities,
    LengthMismatch { zetas: usize, costs: usize },
    NonFiniteParameter { what: String },
    NegativeZeta { fidelity: usize },
    ZetaNotDecreasing { fidelity: usize },
    TopZetaNonzero,
    NonPositiveCost { fidelity: usize },
    CostNotIncreasing { fidelity: usize },
    NonPositiveSigma,
    NoArms,
    RaggedMeans { arm: usize, len: usize, expected: usize },
    NonFiniteMean { arm: usize, fidelity: usize },
    BandExceeded { arm: usize, fidelity: usize },
    MeanOutsideUnit { arm: usize, fidelity: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoFidelities => write!(f, "ladder has no fidelities"),
            Violation::LengthMismatch { zetas, costs } => {
                write!(f, "ladder has {zetas} zetas but {costs} costs")
            }
            Violation::NonFiniteParameter { what } => write!(f, "{what} is not finite"),
            Violation::NegativeZeta { fidelity } => {
                write!(f, "zeta at fidelity {} is negative", fidelity + 1)
            }
            Violation::ZetaNotDecreasing { fidelity } => write!(
                f,
                "zetas not strictly decreasing at fidelity {}",
                fidelity + 1
            ),
            Violation::TopZetaNonzero => write!(f, "zeta at the top fidelity must be exactly 0"),
            Violation::NonPositiveCost { fidelity } => {
                write!(f, "cost at fidelity {} is not positive", fidelity + 1)
            }
            Violation::CostNotIncreasing { fidelity } => write!(
                f,
                "costs not strictly increasing at fidelity {}",
                fidelity + 1
            ),
            Violation::NonPositiveSigma => write!(f, "gaussian sigma must be positive"),
            Violation::NoArms => write!(f, "instance has no arms"),
            Violation::RaggedMeans { arm, len, expected } => write!(
                f,
                "arm {} has {len} means, expected {expected}",
                arm + 1
            ),
            Violation::NonFiniteMean { arm, fidelity } => {
                write!(f, "mean at ({},{}) is not finite", arm + 1, fidelity + 1)
            }
            Violation::BandExceeded { arm, fidelity } => {
                write!(f, "band exceeded at ({},{})", arm + 1, fidelity + 1)
            }
            Violation::MeanOutsideUnit { arm, fidelity } => write!(
                f,
                "mean outside [0,1] at ({},{})",
                arm + 1,
                fidelity + 1
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LadderRepr<T> {
    zetas: Vec<T>,
    costs: Vec<T>,
}

/// Approximation bounds `ζ` and per-play costs `λ` for each fidelity.
///
/// Invariants: at least one fidelity, `ζ` strictly decreasing to exactly 0
/// at the top, costs positive and strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "LadderRepr<T>",
    bound(deserialize = "T: Scalar + Deserialize<'de>", serialize = "T: Serialize")
)]
pub struct FidelityLadder<T> {
    zetas: Vec<T>,
    costs: Vec<T>,
}

impl<T: Scalar> TryFrom<LadderRepr<T>> for FidelityLadder<T> {
    type Error = Error;

    fn try_from(repr: LadderRepr<T>) -> Result<Self> {
        FidelityLadder::new(repr.zetas, repr.costs)
    }
}

impl<T: Scalar> FidelityLadder<T> {
    pub fn new(zetas: Vec<T>, costs: Vec<T>) -> Result<Self> {
        let violations = ladder_violations(&zetas, &costs);
        if violations.is_empty() {
            Ok(Self { zetas, costs })
        } else {
            Err(Error::InvalidProblem(violations))
        }
    }

    /// Convenience for literal ladders.
    pub fn from_f64(zetas: &[f64], costs: &[f64]) -> Result<Self> {
        Self::new(
            zetas.iter().map(|&z| T::lit(z)).collect(),
            costs.iter().map(|&c| T::lit(c)).collect(),
        )
    }

    /// Single-fidelity ladder: the classical bandit.
    pub fn single(cost: T) -> Result<Self> {
        Self::new(vec![T::zero()], vec![cost])
    }

    pub fn num_fidelities(&self) -> usize {
        self.zetas.len()
    }

    /// Index of the target fidelity, `M - 1`.
    pub fn top(&self) -> usize {
        self.zetas.len() - 1
    }

    pub fn zeta(&self, m: usize) -> T {
        self.zetas[m]
    }

    pub fn cost(&self, m: usize) -> T {
        self.costs[m]
    }

    pub fn zetas(&self) -> &[T] {
        &self.zetas
    }

    pub fn costs(&self) -> &[T] {
        &self.costs
    }

    pub fn top_cost(&self) -> T {
        self.costs[self.top()]
    }
}

fn ladder_violations<T: Scalar>(zetas: &[T], costs: &[T]) -> Vec<Violation> {
    let mut out = Vec::new();
    if zetas.is_empty() || costs.is_empty() {
        out.push(Violation::NoFidelities);
        return out;
    }
    if zetas.len() != costs.len() {
        out.push(Violation::LengthMismatch {
            zetas: zetas.len(),
            costs: costs.len(),
        });
        return out;
    }
    for (m, (&z, &c)) in zetas.iter().zip(costs).enumerate() {
        if !z.is_finite() {
            out.push(Violation::NonFiniteParameter {
                what: format!("zeta at fidelity {}", m + 1),
            });
        } else if z < T::zero() {
            out.push(Violation::NegativeZeta { fidelity: m });
        }
        if !c.is_finite() {
            out.push(Violation::NonFiniteParameter {
                what: format!("cost at fidelity {}", m + 1),
            });
        } else if c <= T::zero() {
            out.push(Violation::NonPositiveCost { fidelity: m });
        }
    }
    for m in 1..zetas.len() {
        if !(zetas[m] < zetas[m - 1]) {
            out.push(Violation::ZetaNotDecreasing { fidelity: m });
        }
        if !(costs[m] > costs[m - 1]) {
            out.push(Violation::CostNotIncreasing { fidelity: m });
        }
    }
    if zetas[zetas.len() - 1] != T::zero() {
        out.push(Violation::TopZetaNonzero);
    }
    out
}

/// Reward distribution of every arm-fidelity pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardFamily<T> {
    Gaussian { sigma: T },
    Bernoulli,
}

/// Tail rate family of the concentration bound `P(X̄_s - μ > ε) ≤ ν e^{-s ψ(ε)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFamily<T> {
    /// `ψ(ε) = ε² / (2σ²)`
    SubGaussian { sigma: T },
    /// Hoeffding: `ψ(ε) = 2ε²`, the sub-Gaussian rate with `σ = 1/2`.
    Bernoulli,
}

/// Quadratic concentration rate `ψ` and its leading constant `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationModel<T> {
    pub family: RateFamily<T>,
    pub nu: T,
}

impl<T: Scalar> ConcentrationModel<T> {
    pub fn sub_gaussian(sigma: T) -> Self {
        Self {
            family: RateFamily::SubGaussian { sigma },
            nu: T::one(),
        }
    }

    pub fn bernoulli() -> Self {
        Self {
            family: RateFamily::Bernoulli,
            nu: T::one(),
        }
    }

    /// The rate matching a reward family, with `ν = 1`.
    pub fn for_family(family: &RewardFamily<T>) -> Self {
        match *family {
            RewardFamily::Gaussian { sigma } => Self::sub_gaussian(sigma),
            RewardFamily::Bernoulli => Self::bernoulli(),
        }
    }

    /// Variance proxy `σ²`.
    pub fn variance(&self) -> T {
        match self.family {
            RateFamily::SubGaussian { sigma } => sigma * sigma,
            RateFamily::Bernoulli => T::lit(0.25),
        }
    }

    /// `ψ(ε)` for `ε ≥ 0` (infinite `ε` maps to infinity).
    pub fn psi(&self, eps: T) -> Result<T> {
        if eps.is_nan() || eps < T::zero() {
            return Err(Error::Domain(format!("psi needs eps >= 0, got {eps}")));
        }
        Ok(self.psi_unchecked(eps))
    }

    /// `ψ⁻¹(r)` for `r ≥ 0`; `ψ⁻¹(∞) = ∞`.
    pub fn psi_inv(&self, rate: T) -> Result<T> {
        if rate.is_nan() || rate < T::zero() {
            return Err(Error::Domain(format!(
                "psi_inv needs rate >= 0, got {rate}"
            )));
        }
        Ok(self.psi_inv_unchecked(rate))
    }

    #[inline]
    pub(crate) fn psi_unchecked(&self, eps: T) -> T {
        let two = T::lit(2.0);
        eps * eps / (two * self.variance())
    }

    #[inline]
    pub(crate) fn psi_inv_unchecked(&self, rate: T) -> T {
        let two = T::lit(2.0);
        (two * self.variance() * rate).sqrt()
    }
}

/// Raw, unvalidated problem description; the serialized form of
/// [`ProblemInstance`]. `means[k][m]` is the mean of arm `k` at fidelity `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemData<T> {
    pub zetas: Vec<T>,
    pub costs: Vec<T>,
    pub family: RewardFamily<T>,
    pub means: Vec<Vec<T>>,
}

/// A validated multi-fidelity bandit problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ProblemData<T>",
    into = "ProblemData<T>",
    bound(
        deserialize = "T: Scalar + Deserialize<'de>",
        serialize = "T: Scalar + Serialize"
    )
)]
pub struct ProblemInstance<T> {
    ladder: FidelityLadder<T>,
    family: RewardFamily<T>,
    num_arms: usize,
    /// Row-major `K × M`.
    means: Vec<T>,
    mu_star: T,
    optimal_arms: Vec<usize>,
}

impl<T: Scalar> TryFrom<ProblemData<T>> for ProblemInstance<T> {
    type Error = Error;

    fn try_from(data: ProblemData<T>) -> Result<Self> {
        ProblemInstance::from_data(&data)
    }
}

impl<T: Scalar> From<ProblemInstance<T>> for ProblemData<T> {
    fn from(instance: ProblemInstance<T>) -> Self {
        instance.to_data()
    }
}

impl<T: Scalar> ProblemInstance<T> {
    /// Builds an instance from per-arm mean rows.
    pub fn new(ladder: FidelityLadder<T>, family: RewardFamily<T>, means: Vec<Vec<T>>) -> Result<Self> {
        Self::from_data(&ProblemData {
            zetas: ladder.zetas,
            costs: ladder.costs,
            family,
            means,
        })
    }

    pub fn from_data(data: &ProblemData<T>) -> Result<Self> {
        let violations = validate_instance(data);
        if !violations.is_empty() {
            return Err(Error::InvalidProblem(violations));
        }
        let ladder = FidelityLadder {
            zetas: data.zetas.clone(),
            costs: data.costs.clone(),
        };
        let num_arms = data.means.len();
        let means: Vec<T> = data.means.iter().flatten().copied().collect();
        let top = ladder.top();
        let width = ladder.num_fidelities();
        let mu_star = (0..num_arms)
            .map(|k| means[k * width + top])
            .fold(T::neg_infinity(), T::max);
        let optimal_arms = (0..num_arms)
            .filter(|&k| means[k * width + top] == mu_star)
            .collect();
        Ok(Self {
            ladder,
            family: data.family,
            num_arms,
            means,
            mu_star,
            optimal_arms,
        })
    }

    pub fn to_data(&self) -> ProblemData<T> {
        ProblemData {
            zetas: self.ladder.zetas.clone(),
            costs: self.ladder.costs.clone(),
            family: self.family,
            means: self
                .means
                .chunks(self.num_fidelities())
                .map(<[T]>::to_vec)
                .collect(),
        }
    }

    pub fn ladder(&self) -> &FidelityLadder<T> {
        &self.ladder
    }

    pub fn family(&self) -> &RewardFamily<T> {
        &self.family
    }

    /// Concentration model implied by the reward family (`ν = 1`).
    pub fn concentration(&self) -> ConcentrationModel<T> {
        ConcentrationModel::for_family(&self.family)
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn num_fidelities(&self) -> usize {
        self.ladder.num_fidelities()
    }

    #[inline]
    pub fn mean(&self, arm: usize, fidelity: usize) -> T {
        self.means[arm * self.num_fidelities() + fidelity]
    }

    /// Top-fidelity mean `μ^(M)_k`.
    #[inline]
    pub fn target_mean(&self, arm: usize) -> T {
        self.mean(arm, self.ladder.top())
    }

    pub fn arm_means(&self, arm: usize) -> &[T] {
        let m = self.num_fidelities();
        &self.means[arm * m..(arm + 1) * m]
    }

    /// `μ_* = max_k μ^(M)_k`.
    pub fn mu_star(&self) -> T {
        self.mu_star
    }

    /// Arms attaining `μ_*`, ascending.
    pub fn optimal_arms(&self) -> &[usize] {
        &self.optimal_arms
    }

    pub fn is_optimal(&self, arm: usize) -> bool {
        self.target_mean(arm) == self.mu_star
    }
}

/// Every violated constraint of a raw problem description. Empty means valid.
pub fn validate_instance<T: Scalar>(data: &ProblemData<T>) -> Vec<Violation> {
    let mut out = ladder_violations(&data.zetas, &data.costs);
    if let RewardFamily::Gaussian { sigma } = data.family {
        if !(sigma > T::zero() && sigma.is_finite()) {
            out.push(Violation::NonPositiveSigma);
        }
    }
    if data.means.is_empty() {
        out.push(Violation::NoArms);
    }
    let width = data.zetas.len();
    if width == 0 || width != data.costs.len() {
        return out;
    }
    let top = width - 1;
    for (k, row) in data.means.iter().enumerate() {
        if row.len() != width {
            out.push(Violation::RaggedMeans {
                arm: k,
                len: row.len(),
                expected: width,
            });
            continue;
        }
        for (m, &mu) in row.iter().enumerate() {
            if !mu.is_finite() {
                out.push(Violation::NonFiniteMean { arm: k, fidelity: m });
                continue;
            }
            if matches!(data.family, RewardFamily::Bernoulli) && (mu < T::zero() || mu > T::one()) {
                out.push(Violation::MeanOutsideUnit { arm: k, fidelity: m });
            }
            if row[top].is_finite() && (row[top] - mu).abs() > data.zetas[m] {
                out.push(Violation::BandExceeded { arm: k, fidelity: m });
            }
        }
    }
    out
}

/// `ψ(γ^(m)) = (λ^(m)/λ^(m+1)) ψ(ζ^(m))`: the rate at which the fidelity
/// sweep moves past fidelity `m`.
pub fn gamma_rate<T: Scalar>(
    ladder: &FidelityLadder<T>,
    model: &ConcentrationModel<T>,
    m: usize,
) -> Result<T> {
    if m >= ladder.top() {
        return Err(Error::FidelityIndex {
            index: m,
            limit: ladder.top(),
        });
    }
    Ok(ladder.cost(m) / ladder.cost(m + 1) * model.psi_unchecked(ladder.zeta(m)))
}

/// Fidelity switching threshold `γ^(m) = ψ⁻¹((λ^(m)/λ^(m+1)) ψ(ζ^(m)))`,
/// defined for every fidelity below the top.
pub fn gamma<T: Scalar>(
    ladder: &FidelityLadder<T>,
    model: &ConcentrationModel<T>,
    m: usize,
) -> Result<T> {
    gamma_rate(ladder, model, m).map(|r| model.psi_inv_unchecked(r))
}

/// `Δ^(m)_k = μ_* - μ^(m)_k - ζ^(m)` for every arm and fidelity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapMatrix<T> {
    num_arms: usize,
    num_fidelities: usize,
    deltas: Vec<T>,
}

impl<T: Scalar> GapMatrix<T> {
    #[inline]
    pub fn get(&self, arm: usize, fidelity: usize) -> T {
        self.deltas[arm * self.num_fidelities + fidelity]
    }

    pub fn arm(&self, arm: usize) -> &[T] {
        &self.deltas[arm * self.num_fidelities..(arm + 1) * self.num_fidelities]
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn num_fidelities(&self) -> usize {
        self.num_fidelities
    }
}

pub fn gaps<T: Scalar>(instance: &ProblemInstance<T>) -> GapMatrix<T> {
    let mu_star = instance.mu_star();
    let ladder = instance.ladder();
    let num_fidelities = ladder.num_fidelities();
    let mut deltas = Vec::with_capacity(instance.num_arms() * num_fidelities);
    for k in 0..instance.num_arms() {
        for m in 0..num_fidelities {
            deltas.push(mu_star - instance.mean(k, m) - ladder.zeta(m));
        }
    }
    GapMatrix {
        num_arms: instance.num_arms(),
        num_fidelities,
        deltas,
    }
}

/// One comparison `Σ_{i≤m} 1/ψ(ζ^(i)) ≤ 1/ψ(ζ^(m+1))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct DecayRow<T> {
    /// Zero-based `m`; the comparison is against fidelity `m + 1`.
    pub fidelity: usize,
    #[serde(serialize_with = "report_float::serialize")]
    pub partial_sum: T,
    #[serde(serialize_with = "report_float::serialize")]
    pub bound: T,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct DecayReport<T> {
    pub holds: bool,
    pub rows: Vec<DecayRow<T>>,
}

/// Checks that the approximation bounds decay fast enough relative to the
/// concentration rate. A failure is a diagnostic, not an error.
pub fn check_decay_assumption<T: Scalar>(
    ladder: &FidelityLadder<T>,
    model: &ConcentrationModel<T>,
) -> DecayReport<T> {
    let mut partial_sum = T::zero();
    let mut rows = Vec::with_capacity(ladder.top());
    for m in 0..ladder.top() {
        partial_sum = partial_sum + T::one() / model.psi_unchecked(ladder.zeta(m));
        // ψ(0) = 0 gives an infinite bound at the top fidelity.
        let bound = T::one() / model.psi_unchecked(ladder.zeta(m + 1));
        rows.push(DecayRow {
            fidelity: m,
            partial_sum,
            bound,
            holds: partial_sum <= bound,
        });
    }
    DecayReport {
        holds: rows.iter().all(|r| r.holds),
        rows,
    }
}
