//! Index policies over per-(arm, fidelity) play statistics.
//!
//! [`mfucb_select`] keeps one upper confidence bound on each arm's target
//! mean per fidelity,
//!
//! ```text
//! B^(m)_k(t) = X̄^(m)_k + ψ⁻¹(ρ log t / T^(m)_k) + ζ^(m),    B_k(t) = min_m B^(m)_k(t),
//! ```
//!
//! plays the arm with the largest `B_k`, and picks the first fidelity whose
//! confidence width is still at least `γ^(m)`. [`ucb_select`] is the same
//! index restricted to the top fidelity.
//!
//! Selection never sees true means: it takes the state, the concentration
//! model and the ladder only.

use serde::{Deserialize, Serialize};

use crate::model::{gamma_rate, ConcentrationModel, FidelityLadder};
use crate::{Error, Result, Scalar};

/// Arm and fidelity to play next (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepDecision {
    pub arm: usize,
    pub fidelity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Multi-fidelity UCB.
    MfUcb,
    /// Classical UCB on the top fidelity only.
    Ucb,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::MfUcb => "mfucb",
            PolicyKind::Ucb => "ucb",
        }
    }

    pub fn select<T: Scalar>(
        self,
        state: &PolicyState<T>,
        model: &ConcentrationModel<T>,
        ladder: &FidelityLadder<T>,
    ) -> StepDecision {
        match self {
            PolicyKind::MfUcb => mfucb_select(state, model, ladder),
            PolicyKind::Ucb => ucb_select(state, model, ladder),
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mfucb" => Ok(PolicyKind::MfUcb),
            "ucb" => Ok(PolicyKind::Ucb),
            other => Err(Error::Config(format!(
                "unknown policy '{other}' (expected mfucb or ucb)"
            ))),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Play counts and reward sums for one episode.
///
/// `t` is the index of the next decision: it starts at 1 and always equals
/// `1 + Σ counts`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState<T> {
    num_arms: usize,
    num_fidelities: usize,
    rho: T,
    t: u64,
    // Arm-major `K × M` tables.
    counts: Vec<u64>,
    sums: Vec<T>,
    // Derived from counts/sums; +∞ and 0 for unplayed cells so that the
    // bound of an unplayed cell evaluates to +∞ without branching.
    means: Vec<T>,
    inv_sqrt_counts: Vec<T>,
}

impl<T: Scalar> PolicyState<T> {
    pub fn new(num_arms: usize, num_fidelities: usize, rho: T) -> Self {
        let cells = num_arms * num_fidelities;
        Self {
            num_arms,
            num_fidelities,
            rho,
            t: 1,
            counts: vec![0; cells],
            sums: vec![T::zero(); cells],
            means: vec![T::infinity(); cells],
            inv_sqrt_counts: vec![T::zero(); cells],
        }
    }

    /// State with given arm-major counts and reward sums.
    pub fn with_statistics(
        num_arms: usize,
        num_fidelities: usize,
        rho: T,
        counts: Vec<u64>,
        sums: Vec<T>,
    ) -> Result<Self> {
        let cells = num_arms * num_fidelities;
        if counts.len() != cells || sums.len() != cells {
            return Err(Error::Mismatch(format!(
                "expected {cells} cells, got {} counts and {} sums",
                counts.len(),
                sums.len()
            )));
        }
        let mut state = Self::new(num_arms, num_fidelities, rho);
        state.t = 1 + counts.iter().sum::<u64>();
        state.counts = counts;
        state.sums = sums;
        for cell in 0..cells {
            state.refresh(cell);
        }
        Ok(state)
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn num_fidelities(&self) -> usize {
        self.num_fidelities
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// Index of the next decision.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Number of completed plays.
    pub fn plays(&self) -> u64 {
        self.t - 1
    }

    #[inline]
    fn cell(&self, arm: usize, fidelity: usize) -> usize {
        arm * self.num_fidelities + fidelity
    }

    pub fn count(&self, arm: usize, fidelity: usize) -> u64 {
        self.counts[self.cell(arm, fidelity)]
    }

    pub fn sum(&self, arm: usize, fidelity: usize) -> T {
        self.sums[self.cell(arm, fidelity)]
    }

    /// Arm-major `K × M` play counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn empirical_mean(&self, arm: usize, fidelity: usize) -> Option<T> {
        let c = self.cell(arm, fidelity);
        (self.counts[c] > 0).then(|| self.means[c])
    }

    fn refresh(&mut self, cell: usize) {
        let s = self.counts[cell];
        if s == 0 {
            self.means[cell] = T::infinity();
            self.inv_sqrt_counts[cell] = T::zero();
        } else {
            let s = T::lit(s as f64);
            self.means[cell] = self.sums[cell] / s;
            self.inv_sqrt_counts[cell] = T::one() / s.sqrt();
        }
    }

    /// Records the reward observed for `decision` and advances `t`.
    pub fn update(&mut self, decision: StepDecision, reward: T) -> Result<()> {
        if decision.arm >= self.num_arms {
            return Err(Error::ArmIndex {
                index: decision.arm,
                limit: self.num_arms,
            });
        }
        if decision.fidelity >= self.num_fidelities {
            return Err(Error::FidelityIndex {
                index: decision.fidelity,
                limit: self.num_fidelities,
            });
        }
        let c = self.cell(decision.arm, decision.fidelity);
        self.counts[c] += 1;
        self.sums[c] = self.sums[c] + reward;
        self.refresh(c);
        self.t += 1;
        Ok(())
    }

    fn ln_t(&self) -> T {
        T::lit(self.t as f64).ln()
    }

    fn check_shape(&self, ladder: &FidelityLadder<T>) {
        assert_eq!(
            self.num_fidelities,
            ladder.num_fidelities(),
            "policy state and ladder disagree on the number of fidelities"
        );
    }
}

/// `B^(m)_k(t)`, or +∞ when the cell has not been played.
pub fn bound_mks<T: Scalar>(
    state: &PolicyState<T>,
    model: &ConcentrationModel<T>,
    ladder: &FidelityLadder<T>,
    arm: usize,
    fidelity: usize,
) -> T {
    let s = state.count(arm, fidelity);
    if s == 0 {
        return T::infinity();
    }
    let s = T::lit(s as f64);
    let mean = state.sum(arm, fidelity) / s;
    mean + model.psi_inv_unchecked(state.rho * state.ln_t() / s) + ladder.zeta(fidelity)
}

/// `B_k(t) = min_m B^(m)_k(t)`.
pub fn bound_k<T: Scalar>(
    state: &PolicyState<T>,
    model: &ConcentrationModel<T>,
    ladder: &FidelityLadder<T>,
    arm: usize,
) -> T {
    (0..ladder.num_fidelities())
        .map(|m| bound_mks(state, model, ladder, arm, m))
        .fold(T::infinity(), T::min)
}

/// Confidence width numerator: for quadratic ψ,
/// `ψ⁻¹(ρ log t / s) = ψ⁻¹(ρ log t) / √s`.
#[inline]
fn width_scale<T: Scalar>(state: &PolicyState<T>, model: &ConcentrationModel<T>) -> T {
    model.psi_inv_unchecked(state.rho * state.ln_t())
}

/// Largest count at which the sweep still plays fidelity `m`:
/// `ψ⁻¹(ρ log t / s) ≥ γ^(m)  ⇔  s ≤ ρ log t / ψ(γ^(m))`.
#[inline]
fn sweep_limit<T: Scalar>(rho: T, ln_t: T, gamma_rate: T) -> T {
    rho * ln_t / gamma_rate
}

pub fn mfucb_select<T: Scalar>(
    state: &PolicyState<T>,
    model: &ConcentrationModel<T>,
    ladder: &FidelityLadder<T>,
) -> StepDecision {
    state.check_shape(ladder);
    let width = width_scale(state, model);
    let num_fidelities = state.num_fidelities;
    let zetas = ladder.zetas();

    let mut best_arm = 0;
    let mut best = T::neg_infinity();
    for k in 0..state.num_arms {
        let row = k * num_fidelities;
        let means = &state.means[row..row + num_fidelities];
        let isq = &state.inv_sqrt_counts[row..row + num_fidelities];
        let mut b = T::infinity();
        for m in 0..num_fidelities {
            let v = means[m] + zetas[m] + width * isq[m];
            if v < b {
                b = v;
            }
        }
        // Strict comparison keeps the lowest index on ties.
        if b > best || k == 0 {
            best = b;
            best_arm = k;
        }
    }

    StepDecision {
        arm: best_arm,
        fidelity: sweep_fidelity(state, model, ladder, best_arm),
    }
}

/// First fidelity below the top whose width is still at least `γ^(m)`,
/// otherwise the top fidelity.
fn sweep_fidelity<T: Scalar>(
    state: &PolicyState<T>,
    model: &ConcentrationModel<T>,
    ladder: &FidelityLadder<T>,
    arm: usize,
) -> usize {
    let ln_t = state.ln_t();
    for m in 0..ladder.top() {
        let rate = gamma_rate(ladder, model, m).expect("m below top");
        let s = T::lit(state.count(arm, m) as f64);
        if s <= sweep_limit(state.rho, ln_t, rate) {
            return m;
        }
    }
    ladder.top()
}

/// Top-fidelity UCB, ignoring the cheaper approximations.
pub fn ucb_select<T: Scalar>(
    state: &PolicyState<T>,
    model: &ConcentrationModel<T>,
    ladder: &FidelityLadder<T>,
) -> StepDecision {
    state.check_shape(ladder);
    let width = width_scale(state, model);
    let top = ladder.top();
    let mut best_arm = 0;
    let mut best = T::neg_infinity();
    for k in 0..state.num_arms {
        let c = state.cell(k, top);
        let b = state.means[c] + width * state.inv_sqrt_counts[c];
        if b > best || k == 0 {
            best = b;
            best_arm = k;
        }
    }
    StepDecision {
        arm: best_arm,
        fidelity: top,
    }
}

/// Deterministic cap on plays of any arm at fidelity `m` below the top after
/// `n ≥ 1` plays: `⌊ρ log n / ψ(γ^(m))⌋ + 1`.
pub fn fidelity_play_cap<T: Scalar>(
    ladder: &FidelityLadder<T>,
    model: &ConcentrationModel<T>,
    rho: T,
    fidelity: usize,
    plays: u64,
) -> Result<u64> {
    let rate = gamma_rate(ladder, model, fidelity)?;
    if plays == 0 {
        return Ok(0);
    }
    let ln_n = T::lit(plays as f64).ln();
    let limit = sweep_limit(rho, ln_n, rate).floor();
    Ok(limit.to_u64().unwrap_or(u64::MAX).saturating_add(1))
}
