//! Softmax parameterization of the policy.
//!
//! Logits live in [`Parameters`]; [`softmax`] maps them to a [`PolicyDist`].
//! Probabilities are computed in max-shifted form, so logits of magnitude up
//! to 1e6 (and beyond) never overflow. Entries for logits more than ~745 below
//! the maximum underflow to exactly zero; every other entry is strictly positive.

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Softmax logits, one per arm. `K >= 2` is fixed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    theta: Vec<f64>,
}

impl Parameters {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 logits, got {}",
                theta.len()
            )));
        }
        if let Some(i) = theta.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "logit {i} is not finite ({})",
                theta[i]
            )));
        }
        Ok(Self { theta })
    }

    pub fn zeros(k: usize) -> Result<Self> {
        Self::new(vec![0.0; k])
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.theta.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Probability vector over arms.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyDist {
    probs: Vec<f64>,
}

impl PolicyDist {
    /// Validates an explicit probability vector (nonnegative, sums to one within 1e-12).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidParameter(
                "policy needs at least 2 arms".into(),
            ));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, arm: usize) -> Result<Self> {
        if arm >= k {
            return Err(Error::ArmOutOfRange { arm, k });
        }
        let mut probs = vec![0.0; k];
        probs[arm] = 1.0;
        Self::new(probs)
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, arm: usize) -> f64 {
        self.probs[arm]
    }

    /// `1 - pi(arm)`, summed from the other entries so it keeps full relative
    /// precision when `pi(arm)` is close to one.
    pub fn complement(&self, arm: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != arm)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

/// Max-shifted softmax.
pub fn softmax(params: &Parameters) -> Result<PolicyDist> {
    if !params.is_finite() {
        return Err(Error::InvalidParameter("non-finite logits".into()));
    }
    Ok(PolicyDist {
        probs: softmax_slice(params.as_slice()),
    })
}

pub(crate) fn softmax_slice(theta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; theta.len()];
    softmax_into(theta, &mut out);
    out
}

pub(crate) fn softmax_into(theta: &[f64], out: &mut [f64]) {
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &t) in out.iter_mut().zip(theta) {
        *o = (t - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `diag(pi) - pi pi^T`, the Jacobian of `theta -> softmax(theta)`.
pub fn softmax_jacobian(policy: &PolicyDist) -> Vec<Vec<f64>> {
    let p = policy.as_slice();
    p.iter()
        .enumerate()
        .map(|(i, &pi)| {
            p.iter()
                .enumerate()
                .map(|(j, &pj)| if i == j { pi * (1.0 - pi) } else { -pi * pj })
                .collect()
        })
        .collect()
}

/// Inverse-CDF sampling from a single uniform draw, scanning arms in index order.
pub fn sample_action(policy: &PolicyDist, rng: &mut RandomStream) -> usize {
    sample_from_uniform(policy.as_slice(), rng.next_uniform())
}

pub(crate) fn sample_from_uniform(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return a;
        }
    }
    // Rounding left `u` above the accumulated mass: take the last reachable arm.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}
