use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{FidelityLadder, ProblemInstance, RewardFamily};
use crate::{Error, Result, Scalar};

/// Bernoulli lower-fidelity means are truncated into this closed interval.
pub const BERNOULLI_CLAMP: (f64, f64) = (0.001, 0.999);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighFidelityMeans<T> {
    /// `K` evenly spaced interior points of `(lo, hi)`:
    /// `lo + (hi - lo)(k + 1)/(K + 1)`.
    UniformGrid { lo: T, hi: T },
    /// Independent `N(0, 1)` draws.
    GaussianSample,
}

/// Recipe for synthetic instances: top-fidelity means from `high_fidelity_means`,
/// lower fidelities uniform in the `±ζ^(m)` band around them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    deserialize = "T: Scalar + Deserialize<'de>",
    serialize = "T: Scalar + Serialize"
))]
pub struct GeneratorSpec<T> {
    pub num_arms: usize,
    pub ladder: FidelityLadder<T>,
    pub family: RewardFamily<T>,
    pub high_fidelity_means: HighFidelityMeans<T>,
    /// Push the lower-fidelity means of one optimal arm to the bottom of
    /// their bands (Gaussian problems only).
    #[serde(default)]
    pub optimal_arm_suppression: bool,
}

impl<T: Scalar> GeneratorSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_arms == 0 {
            return fail("num_arms must be at least 1".into());
        }
        if let RewardFamily::Gaussian { sigma } = self.family {
            if !(sigma > T::zero() && sigma.is_finite()) {
                return fail(format!("gaussian sigma must be positive, got {sigma}"));
            }
        }
        match (self.high_fidelity_means, self.family) {
            (HighFidelityMeans::UniformGrid { lo, hi }, family) => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return fail(format!("uniform grid needs lo < hi, got ({lo}, {hi})"));
                }
                if family == RewardFamily::Bernoulli && (lo < T::zero() || hi > T::one()) {
                    return fail(format!(
                        "bernoulli grid must lie within (0, 1), got ({lo}, {hi})"
                    ));
                }
            }
            (HighFidelityMeans::GaussianSample, RewardFamily::Bernoulli) => {
                return fail("gaussian-sampled means are not valid bernoulli means".into());
            }
            (HighFidelityMeans::GaussianSample, _) => {}
        }
        if self.optimal_arm_suppression && self.family == RewardFamily::Bernoulli {
            return fail("optimal_arm_suppression applies to gaussian problems only".into());
        }
        Ok(())
    }
}

/// RNG used for instance generation from `seed`. Uses a different ChaCha
/// stream than the reward RNG of an episode with the same seed.
pub fn instance_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Moves `x` toward `center` by whole ulps until `|center - x| ≤ zeta`
/// holds in floating point.
fn fit_band<T: Scalar>(center: T, x: T, zeta: T) -> T {
    let mut x = x;
    while (center - x).abs() > zeta {
        let step = x.abs().max(center.abs()).max(T::min_positive_value()) * T::epsilon();
        x = if x < center { x + step } else { x - step };
    }
    x
}

pub fn generate_instance<T: Scalar, R: Rng + ?Sized>(
    spec: &GeneratorSpec<T>,
    rng: &mut R,
) -> Result<ProblemInstance<T>> {
    spec.validate()?;
    let k_arms = spec.num_arms;
    let ladder = &spec.ladder;
    let top = ladder.top();

    let top_means: Vec<T> = match spec.high_fidelity_means {
        HighFidelityMeans::UniformGrid { lo, hi } => (0..k_arms)
            .map(|k| lo + (hi - lo) * T::lit((k + 1) as f64) / T::lit((k_arms + 1) as f64))
            .collect(),
        HighFidelityMeans::GaussianSample => (0..k_arms)
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect(),
    };

    let (clamp_lo, clamp_hi) = (T::lit(BERNOULLI_CLAMP.0), T::lit(BERNOULLI_CLAMP.1));
    let mut means: Vec<Vec<T>> = top_means
        .iter()
        .map(|&mu| {
            let mut row = Vec::with_capacity(ladder.num_fidelities());
            for m in 0..top {
                let zeta = ladder.zeta(m);
                let u: f64 = rng.random();
                let mut x = mu + zeta * T::lit(2.0 * u - 1.0);
                if spec.family == RewardFamily::Bernoulli {
                    x = x.max(clamp_lo).min(clamp_hi);
                }
                row.push(fit_band(mu, x, zeta));
            }
            row.push(mu);
            row
        })
        .collect();

    if spec.optimal_arm_suppression {
        let best = top_means
            .iter()
            .enumerate()
            .fold(0, |b, (k, &mu)| if mu > top_means[b] { k } else { b });
        let mu = top_means[best];
        for m in 0..top {
            let zeta = ladder.zeta(m);
            means[best][m] = fit_band(mu, mu - zeta, zeta);
        }
    }

    ProblemInstance::new(ladder.clone(), spec.family, means)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::validate_instance;

    fn spec(family: RewardFamily<f64>, means: HighFidelityMeans<f64>, suppress: bool) -> GeneratorSpec<f64> {
        GeneratorSpec {
            num_arms: 50,
            ladder: FidelityLadder::from_f64(&[0.2, 0.1, 0.0], &[1.0, 10.0, 1000.0]).unwrap(),
            family,
            high_fidelity_means: means,
            optimal_arm_suppression: suppress,
        }
    }

    #[test]
    fn grid_is_interior_and_sorted() {
        let s = spec(
            RewardFamily::Gaussian { sigma: 0.2 },
            HighFidelityMeans::UniformGrid { lo: 0.0, hi: 1.0 },
            false,
        );
        let inst = generate_instance(&s, &mut instance_rng(1)).unwrap();
        let top: Vec<f64> = (0..50).map(|k| inst.target_mean(k)).collect();
        assert!(top.windows(2).all(|w| w[0] < w[1]));
        assert!(top[0] > 0.0 && top[49] < 1.0);
        assert!((top[0] - 1.0 / 51.0).abs() < 1e-15);
        assert_eq!(inst.optimal_arms(), &[49]);
    }

    #[test]
    fn suppression_hits_band_minimum() {
        let s = spec(
            RewardFamily::Gaussian { sigma: 0.2 },
            HighFidelityMeans::UniformGrid { lo: 0.0, hi: 1.0 },
            true,
        );
        let inst = generate_instance(&s, &mut instance_rng(2)).unwrap();
        let best = inst.optimal_arms()[0];
        for m in 0..2 {
            let want = inst.mu_star() - inst.ladder().zeta(m);
            assert!((inst.mean(best, m) - want).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(RewardFamily::Bernoulli, HighFidelityMeans::UniformGrid { lo: 0.1, hi: 0.9 }, true);
        assert!(s.validate().is_err());
        s.optimal_arm_suppression = false;
        assert!(s.validate().is_ok());
        s.high_fidelity_means = HighFidelityMeans::UniformGrid { lo: 0.5, hi: 0.5 };
        assert!(s.validate().is_err());
        s.high_fidelity_means = HighFidelityMeans::UniformGrid { lo: -0.5, hi: 0.5 };
        assert!(s.validate().is_err());
        s.high_fidelity_means = HighFidelityMeans::GaussianSample;
        assert!(s.validate().is_err());
        s.num_arms = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn bernoulli_clamped() {
        let s = GeneratorSpec {
            num_arms: 200,
            ladder: FidelityLadder::from_f64(&[0.5, 0.2, 0.0], &[1.0, 3.0, 10.0]).unwrap(),
            family: RewardFamily::Bernoulli,
            high_fidelity_means: HighFidelityMeans::UniformGrid { lo: 0.1, hi: 0.9 },
            optimal_arm_suppression: false,
        };
        let inst = generate_instance(&s, &mut instance_rng(3)).unwrap();
        for k in 0..200 {
            for m in 0..2 {
                let mu = inst.mean(k, m);
                assert!((0.001..=0.999).contains(&mu));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn generated_instances_validate(seed in any::<u64>(), gaussian in any::<bool>(), suppress in any::<bool>()) {
            let s = if gaussian {
                spec(RewardFamily::Gaussian { sigma: 1.0 }, HighFidelityMeans::GaussianSample, suppress)
            } else {
                spec(RewardFamily::Bernoulli, HighFidelityMeans::UniformGrid { lo: 0.0, hi: 1.0 }, false)
            };
            let inst = generate_instance(&s, &mut instance_rng(seed)).unwrap();
            prop_assert!(validate_instance(&inst.to_data()).is_empty());
            for k in 0..inst.num_arms() {
                for m in 0..inst.num_fidelities() {
                    prop_assert!((inst.target_mean(k) - inst.mean(k, m)).abs() <= inst.ladder().zeta(m));
                }
            }
        }
    }
}
