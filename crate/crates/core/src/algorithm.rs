//! The gradient bandit update (no baseline).
//!
//! [`step_direct`] is the production path: the sampled arm's logit moves by
//! `eta (1 - pi(a_t)) R`, every other logit by `-eta pi(a) R`. [`step_sga`]
//! is the same update written as stochastic gradient ascent with the
//! importance-sampling reward estimate; the two agree to rounding.

use crate::env::BanditEnv;
use crate::error::{Error, Result};
use crate::policy::{softmax, softmax_jacobian, Parameters, PolicyDist};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateInputs {
    pub eta: f64,
    pub action: usize,
    pub reward: f64,
}

impl UpdateInputs {
    pub fn new(eta: f64, action: usize, reward: f64) -> Result<Self> {
        check_eta(eta)?;
        if !reward.is_finite() {
            return Err(Error::InvalidInput(format!(
                "reward {reward} is not finite"
            )));
        }
        Ok(Self {
            eta,
            action,
            reward,
        })
    }
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "learning rate must be positive, got {eta}"
        )))
    }
}

/// Importance-sampling estimate of the full reward vector: one nonzero entry
/// `R / pi(a_t)` at the sampled arm.
#[derive(Clone, Debug, PartialEq)]
pub struct IsEstimate {
    pub r_hat: Vec<f64>,
}

/// `theta'(a) = theta(a) + eta (1{a = a_t} - pi(a)) R` applied in place.
pub(crate) fn apply_direct(theta: &mut [f64], probs: &[f64], action: usize, eta: f64, reward: f64) {
    let scaled = eta * reward;
    let mut others = 0.0;
    for (a, (t, &p)) in theta.iter_mut().zip(probs).enumerate() {
        if a != action {
            *t -= scaled * p;
            others += p;
        }
    }
    theta[action] += scaled * others;
}

pub fn step_direct(
    params: &Parameters,
    inputs: &UpdateInputs,
    policy: &PolicyDist,
) -> Result<Parameters> {
    let k = params.k();
    if policy.k() != k {
        return Err(Error::InvalidInput(format!(
            "policy has {} arms, parameters {k}",
            policy.k()
        )));
    }
    if inputs.action >= k {
        return Err(Error::ArmOutOfRange {
            arm: inputs.action,
            k,
        });
    }
    check_eta(inputs.eta)?;
    if !inputs.reward.is_finite() {
        return Err(Error::InvalidInput(format!(
            "reward {} is not finite",
            inputs.reward
        )));
    }
    let mut next = params.clone();
    apply_direct(
        next.as_mut_slice(),
        policy.as_slice(),
        inputs.action,
        inputs.eta,
        inputs.reward,
    );
    Ok(next)
}

pub fn is_estimate(policy: &PolicyDist, action: usize, reward: f64) -> IsEstimate {
    let mut r_hat = vec![0.0; policy.k()];
    if reward != 0.0 {
        r_hat[action] = reward / policy.prob(action);
    }
    IsEstimate { r_hat }
}

/// `theta' = theta + eta (diag(pi) - pi pi^T) r_hat` with `pi = softmax(theta)`.
pub fn step_sga(params: &Parameters, eta: f64, estimate: &IsEstimate) -> Result<Parameters> {
    check_eta(eta)?;
    if estimate.r_hat.len() != params.k() {
        return Err(Error::InvalidInput(
            "estimate length does not match K".into(),
        ));
    }
    if estimate.r_hat.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite reward estimate".into()));
    }
    let jac = softmax_jacobian(&softmax(params)?);
    let theta = params
        .as_slice()
        .iter()
        .zip(&jac)
        .map(|(t, row)| t + eta * dot(row, &estimate.r_hat))
        .collect();
    Parameters::new(theta)
}

/// `(diag(pi) - pi pi^T) r`, the gradient of `pi^T r` with respect to the logits.
pub fn exact_gradient(env: &BanditEnv, policy: &PolicyDist) -> Vec<f64> {
    softmax_jacobian(policy)
        .iter()
        .map(|row| dot(row, env.means()))
        .collect()
}

/// Expected one-step change of every logit, by enumerating the K possible
/// sampled arms and averaging the direct update at each arm's mean reward.
/// The update is linear in the reward, so this is exact for every reward kind.
pub fn expected_update(env: &BanditEnv, policy: &PolicyDist, eta: f64) -> Vec<f64> {
    let k = policy.k();
    let mut expected = vec![0.0; k];
    let mut delta = vec![0.0; k];
    for action in 0..k {
        delta.iter_mut().for_each(|x| *x = 0.0);
        apply_direct(
            &mut delta,
            policy.as_slice(),
            action,
            eta,
            env.means()[action],
        );
        let weight = policy.prob(action);
        for (e, d) in expected.iter_mut().zip(&delta) {
            *e += weight * d;
        }
    }
    expected
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    fn params(v: &[f64]) -> Parameters {
        Parameters::new(v.to_vec()).unwrap()
    }

    fn direct(theta: &[f64], eta: f64, action: usize, reward: f64) -> Vec<f64> {
        let p = params(theta);
        let pi = softmax(&p).unwrap();
        step_direct(&p, &UpdateInputs::new(eta, action, reward).unwrap(), &pi)
            .unwrap()
            .into_vec()
    }

    #[test]
    fn direct_step_two_arms() {
        assert_eq!(direct(&[0.0, 0.0], 1.0, 0, 0.5), vec![0.25, -0.25]);
    }

    #[test]
    fn zero_reward_is_fixed_point() {
        let theta = [0.3, -1.2, 4.0];
        assert_eq!(direct(&theta, 7.0, 1, 0.0), theta.to_vec());
    }

    #[test]
    fn saturated_policy_barely_moves() {
        let next = direct(&[50.0, -50.0], 10.0, 0, 1.0);
        let moved = next[0] - 50.0;
        assert!(moved >= 0.0 && moved <= 10.0 * (-100f64).exp() * 1.000001);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(UpdateInputs::new(0.0, 0, 1.0).is_err());
        assert!(UpdateInputs::new(1.0, 0, f64::NAN).is_err());
        let p = params(&[0.0, 0.0]);
        let pi = softmax(&p).unwrap();
        let bad = UpdateInputs {
            eta: 1.0,
            action: 5,
            reward: 1.0,
        };
        assert!(step_direct(&p, &bad, &pi).is_err());
        let est = IsEstimate {
            r_hat: vec![f64::INFINITY, 0.0],
        };
        assert!(step_sga(&p, 1.0, &est).is_err());
    }

    #[test]
    fn is_estimate_examples() {
        let half = PolicyDist::uniform(2).unwrap();
        assert_eq!(is_estimate(&half, 0, 1.0).r_hat, vec![2.0, 0.0]);
        assert_eq!(is_estimate(&half, 1, 0.0).r_hat, vec![0.0, 0.0]);
        let quarter = PolicyDist::uniform(4).unwrap();
        let est = is_estimate(&quarter, 2, -0.1);
        assert_eq!(est.r_hat.iter().filter(|x| **x != 0.0).count(), 1);
        assert!((est.r_hat[2] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn sga_step_matches_hand_value() {
        let p = params(&[0.0, 0.0]);
        let next = step_sga(
            &p,
            1.0,
            &IsEstimate {
                r_hat: vec![1.0, 0.0],
            },
        )
        .unwrap();
        assert_eq!(next.as_slice(), &[0.25, -0.25]);
        let same = step_sga(
            &p,
            1.0,
            &IsEstimate {
                r_hat: vec![0.0, 0.0],
            },
        )
        .unwrap();
        assert_eq!(same, p);
    }

    #[test]
    fn exact_gradient_uniform_four_arm_env() {
        let env = BanditEnv::point_mass(vec![0.2, 0.05, -0.1, -0.4], 1.0).unwrap();
        let g = exact_gradient(&env, &PolicyDist::uniform(4).unwrap());
        assert!((g[0] - 0.065625).abs() < 1e-15);
        assert!(g.iter().sum::<f64>().abs() < 1e-14);
        let hot = exact_gradient(&env, &PolicyDist::one_hot(4, 2).unwrap());
        assert!(hot.iter().all(|x| x.abs() < 1e-20));
    }

    #[test]
    fn expected_update_two_arm_example() {
        let env = BanditEnv::point_mass(vec![1.0, 0.0], 1.0).unwrap();
        let p = expected_update(&env, &PolicyDist::uniform(2).unwrap(), 2.0);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] + 0.5).abs() < 1e-15);
        let hot = expected_update(&env, &PolicyDist::one_hot(2, 0).unwrap(), 2.0);
        assert_eq!(hot, vec![0.0, 0.0]);
    }

    #[test]
    fn two_arm_sign_structure() {
        let env = BanditEnv::point_mass(vec![-0.05, -0.25], 1.0).unwrap();
        for i in 1..100 {
            let p1 = i as f64 / 100.0;
            let pi = PolicyDist::new(vec![p1, 1.0 - p1]).unwrap();
            let p = expected_update(&env, &pi, 3.0);
            assert!(p[0] > 0.0 && p[1] < 0.0);
        }
    }

    #[test]
    fn logit_sum_is_invariant() {
        let mut rng = RandomStream::new(0, 17);
        let mut theta = params(&[0.0; 5]);
        let start: f64 = theta.as_slice().iter().sum();
        for _ in 0..1000 {
            let pi = softmax(&theta).unwrap();
            let a = crate::policy::sample_action(&pi, &mut rng);
            let r = rng.next_uniform() * 2.0 - 1.0;
            theta = step_direct(&theta, &UpdateInputs::new(5.0, a, r).unwrap(), &pi).unwrap();
            let sum: f64 = theta.as_slice().iter().sum();
            assert!((sum - start).abs() < 1e-10);
        }
    }
}
