//! Stochastic multi-armed bandit environments.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::policy::{argmax, PolicyDist};
use crate::rng::RandomStream;

/// Per-arm reward distribution family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// Unclipped Gaussian centered at the arm mean, one standard deviation per arm.
    Gaussian { sigma: Vec<f64> },
    /// Values in `{-1, +1}` with `P(+1) = (1 + r(a)) / 2`, so the mean is `r(a)`.
    Bernoulli,
    /// Deterministic reward equal to the mean.
    PointMass,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardSample {
    pub arm: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BanditEnv {
    means: Vec<f64>,
    kind: RewardKind,
    r_max: f64,
    optimal_arm: usize,
    gap: f64,
}

impl BanditEnv {
    pub fn new(means: Vec<f64>, kind: RewardKind, r_max: f64) -> Result<Self> {
        let k = means.len();
        if k < 2 {
            return Err(Error::Config(format!("need at least 2 arms, got {k}")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("means must be finite".into()));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::Config(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        if let Some(m) = means.iter().find(|m| m.abs() > r_max) {
            return Err(Error::Config(format!("mean {m} exceeds r_max {r_max}")));
        }
        for i in 0..k {
            for j in (i + 1)..k {
                if means[i] == means[j] {
                    return Err(Error::Config(format!(
                        "arms {} and {} have tied means {}",
                        i + 1,
                        j + 1,
                        means[i]
                    )));
                }
            }
        }
        match &kind {
            RewardKind::Gaussian { sigma } => {
                if sigma.len() != k {
                    return Err(Error::Config(format!(
                        "{} sigmas given for {k} arms",
                        sigma.len()
                    )));
                }
                if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err(Error::Config("sigma must be positive".into()));
                }
            }
            RewardKind::Bernoulli => {
                if r_max < 1.0 {
                    return Err(Error::Config(
                        "bernoulli rewards are +-1, r_max must be at least 1".into(),
                    ));
                }
            }
            RewardKind::PointMass => {}
        }
        let optimal_arm = argmax(&means);
        let runner_up = means
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != optimal_arm)
            .map(|(_, &m)| m)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            gap: means[optimal_arm] - runner_up,
            means,
            kind,
            r_max,
            optimal_arm,
        })
    }

    pub fn gaussian(means: Vec<f64>, sigma: f64, r_max: f64) -> Result<Self> {
        let k = means.len();
        Self::new(
            means,
            RewardKind::Gaussian {
                sigma: vec![sigma; k],
            },
            r_max,
        )
    }

    pub fn bernoulli(means: Vec<f64>) -> Result<Self> {
        Self::new(means, RewardKind::Bernoulli, 1.0)
    }

    pub fn point_mass(means: Vec<f64>, r_max: f64) -> Result<Self> {
        Self::new(means, RewardKind::PointMass, r_max)
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn kind(&self) -> &RewardKind {
        &self.kind
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn optimal_arm(&self) -> usize {
        self.optimal_arm
    }

    /// `r(a*) - max_{a != a*} r(a)`, strictly positive.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Whether every sampled reward satisfies `|R| <= r_max`.
    ///
    /// False for Gaussian arms: envelopes computed with `r_max` are then only
    /// approximate (for sigma = 0.1 and means within 0.4 of zero, a reward
    /// leaves `[-1, 1]` with probability on the order of 1e-9).
    pub fn bounded_support(&self) -> bool {
        !matches!(self.kind, RewardKind::Gaussian { .. })
    }

    /// Draws one reward for `arm`. Always consumes exactly one 64-bit draw.
    pub fn sample_reward(&self, arm: usize, rng: &mut RandomStream) -> Result<RewardSample> {
        if arm >= self.k() {
            return Err(Error::ArmOutOfRange { arm, k: self.k() });
        }
        Ok(RewardSample {
            arm,
            value: self.sample_unchecked(arm, rng),
        })
    }

    pub(crate) fn sample_unchecked(&self, arm: usize, rng: &mut RandomStream) -> f64 {
        let mean = self.means[arm];
        match &self.kind {
            RewardKind::Gaussian { sigma } => {
                let u = rng.next_open_uniform();
                mean + sigma[arm] * standard_normal_quantile(u)
            }
            RewardKind::Bernoulli => {
                if rng.next_uniform() < 0.5 * (1.0 + mean) {
                    1.0
                } else {
                    -1.0
                }
            }
            RewardKind::PointMass => {
                rng.next_u64();
                mean
            }
        }
    }

    /// `r(a*) - pi^T r`, accumulated as `sum_{a != a*} pi(a) (r(a*) - r(a))`
    /// so tiny gaps are not lost to cancellation.
    pub fn suboptimality(&self, policy: &PolicyDist) -> f64 {
        suboptimality_slice(&self.means, self.optimal_arm, policy.as_slice())
    }

    /// Largest constant step size covered by earlier small-step analyses:
    /// `gap^2 / (40 K^{3/2} r_max^3)`.
    pub fn critical_learning_rate(&self) -> f64 {
        let k = self.k() as f64;
        self.gap * self.gap / (40.0 * k.powf(1.5) * self.r_max.powi(3))
    }
}

pub(crate) fn suboptimality_slice(means: &[f64], optimal_arm: usize, probs: &[f64]) -> f64 {
    let best = means[optimal_arm];
    probs
        .iter()
        .zip(means)
        .enumerate()
        .filter(|&(a, _)| a != optimal_arm)
        .map(|(_, (p, m))| p * (best - m))
        .sum()
}

fn standard_normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}
