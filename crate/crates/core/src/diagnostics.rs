//! Online observables of the convergence analysis.
//!
//! Every logit change splits into a progress term (its conditional
//! expectation, computed from the true means) and a noise term (the rest):
//! `theta_t = theta_1 + sum W + sum P`. The noise sums are martingales whose
//! deviation is bounded with high probability by [`freedman_envelope`] in
//! terms of the variance proxy `V_t(a) = 5/18 sum_s pi_s(a) (1 - pi_s(a))`.

use serde::{Deserialize, Serialize};

use crate::env::BanditEnv;
use crate::error::{Error, Result};
use crate::experiment::RunTrace;
use crate::policy::{Parameters, PolicyDist};

const VARIANCE_SCALE: f64 = 5.0 / 18.0;

/// Minimum count for the second-most-sampled arm at eta = 1000, T = 1e5.
///
/// Set to the 10th percentile of a 50-run pilot (`examples/exploration_pilot.rs`,
/// output in `docs/exploration_pilot.txt`). At that step size the policy
/// saturates within a few iterations, so the percentile is 0.
pub const EXPLORATION_PILOT_THRESHOLD: u64 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsState {
    pub counts: Vec<u64>,
    pub cum_progress: Vec<f64>,
    pub cum_noise: Vec<f64>,
    pub variance_proxy: Vec<f64>,
    pub theta_initial: Vec<f64>,
    pub step: u64,
}

/// Diagnostics captured at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSnapshot {
    pub cum_progress: Vec<f64>,
    pub cum_noise: Vec<f64>,
    pub variance_proxy: Vec<f64>,
    /// `max_a |theta_t(a) - theta_1(a) - cum_noise(a) - cum_progress(a)|`.
    pub residual: f64,
}

impl DiagnosticsState {
    pub fn new(theta_initial: &[f64]) -> Self {
        let k = theta_initial.len();
        Self {
            counts: vec![0; k],
            cum_progress: vec![0.0; k],
            cum_noise: vec![0.0; k],
            variance_proxy: vec![0.0; k],
            theta_initial: theta_initial.to_vec(),
            step: 0,
        }
    }

    pub fn record_step(
        &mut self,
        env: &BanditEnv,
        policy_before: &PolicyDist,
        eta: f64,
        action: usize,
        theta_after: &Parameters,
        theta_before: &Parameters,
    ) {
        self.record_slices(
            env.means(),
            policy_before.as_slice(),
            eta,
            action,
            theta_after.as_slice(),
            theta_before.as_slice(),
        );
    }

    pub(crate) fn record_slices(
        &mut self,
        means: &[f64],
        probs: &[f64],
        eta: f64,
        action: usize,
        theta_after: &[f64],
        theta_before: &[f64],
    ) {
        let value: f64 = probs.iter().zip(means).map(|(p, r)| p * r).sum();
        self.counts[action] += 1;
        for a in 0..probs.len() {
            let progress = eta * probs[a] * (means[a] - value);
            self.cum_progress[a] += progress;
            self.cum_noise[a] += theta_after[a] - theta_before[a] - progress;
            self.variance_proxy[a] += VARIANCE_SCALE * probs[a] * (1.0 - probs[a]);
        }
        self.step += 1;
    }

    pub fn residual(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .enumerate()
            .map(|(a, t)| {
                (t - self.theta_initial[a] - self.cum_noise[a] - self.cum_progress[a]).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn snapshot(&self, theta: &[f64]) -> DiagnosticsSnapshot {
        DiagnosticsSnapshot {
            cum_progress: self.cum_progress.clone(),
            cum_noise: self.cum_noise.clone(),
            variance_proxy: self.variance_proxy.clone(),
            residual: self.residual(theta),
        }
    }
}

/// High-probability bound on `|sum_s W_{s+1}(a)|`, uniform over time:
///
/// `36 eta R sqrt((v + 4/3) ln((v + 1)/delta)) + 12 eta R ln(1/delta) + 8 eta R ln 3`.
///
/// Logarithms are natural.
pub fn freedman_envelope(v: f64, delta: f64, eta: f64, r_max: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "variance proxy must be >= 0, got {v}"
        )));
    }
    let scale = eta * r_max;
    let root = ((v + 4.0 / 3.0) * ((v + 1.0) / delta).ln()).sqrt();
    Ok(36.0 * scale * root + 12.0 * scale * (1.0 / delta).ln() + 8.0 * scale * 3f64.ln())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolationReport {
    pub arm: usize,
    pub delta: f64,
    pub runs: usize,
    pub violations: usize,
    pub rate: f64,
}

impl ViolationReport {
    /// Rate limit `delta + 3 sqrt(delta (1 - delta) / runs)`.
    pub fn binomial_limit(&self) -> f64 {
        self.delta + 3.0 * (self.delta * (1.0 - self.delta) / self.runs as f64).sqrt()
    }
}

/// Fraction of runs whose cumulative noise on `arm` leaves the envelope at
/// any recorded checkpoint.
pub fn envelope_violation_test(
    runs: &[RunTrace],
    arm: usize,
    delta: f64,
) -> Result<ViolationReport> {
    if runs.is_empty() {
        return Err(Error::InvalidInput("no runs to test".into()));
    }
    let mut violations = 0;
    for run in runs {
        if arm >= run.k {
            return Err(Error::ArmOutOfRange { arm, k: run.k });
        }
        let mut violated = false;
        for row in &run.rows {
            let diag = row.diagnostics.as_ref().ok_or_else(|| {
                Error::InvalidInput(format!("run seed {} has no diagnostics", run.seed))
            })?;
            let bound = freedman_envelope(diag.variance_proxy[arm], delta, run.eta, run.r_max)?;
            if diag.cum_noise[arm].abs() > bound {
                violated = true;
                break;
            }
        }
        if violated {
            violations += 1;
        }
    }
    Ok(ViolationReport {
        arm,
        delta,
        runs: runs.len(),
        violations,
        rate: violations as f64 / runs.len() as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplorationSummary {
    /// Terminal sample counts sorted in descending order.
    pub sorted_counts: Vec<u64>,
    /// Count of the second-most-sampled arm.
    pub second_count: u64,
    /// Share of all samples taken by the two most-sampled arms.
    pub top_two_share: f64,
    /// Only one arm was ever sampled.
    pub starved: bool,
}

pub fn exploration_summary(trace: &RunTrace) -> ExplorationSummary {
    summarize_counts(&trace.terminal.counts)
}

pub fn summarize_counts(counts: &[u64]) -> ExplorationSummary {
    let mut sorted_counts = counts.to_vec();
    sorted_counts.sort_unstable_by(|a, b| b.cmp(a));
    let total: u64 = sorted_counts.iter().sum();
    let second_count = sorted_counts.get(1).copied().unwrap_or(0);
    let top_two = sorted_counts[0] + second_count;
    ExplorationSummary {
        top_two_share: if total == 0 {
            0.0
        } else {
            top_two as f64 / total as f64
        },
        starved: second_count == 0,
        second_count,
        sorted_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::{step_direct, UpdateInputs};
    use crate::policy::softmax;

    #[test]
    fn single_step_decomposes_exactly() {
        let env = BanditEnv::point_mass(vec![0.2, 0.05, -0.1, -0.4], 1.0).unwrap();
        let before = Parameters::new(vec![0.3, -0.1, 0.0, 0.5]).unwrap();
        let pi = softmax(&before).unwrap();
        let after = step_direct(&before, &UpdateInputs::new(3.0, 2, -0.1).unwrap(), &pi).unwrap();
        let mut state = DiagnosticsState::new(before.as_slice());
        state.record_step(&env, &pi, 3.0, 2, &after, &before);
        for a in 0..4 {
            let change = after.as_slice()[a] - before.as_slice()[a];
            assert!((state.cum_noise[a] + state.cum_progress[a] - change).abs() < 1e-12);
        }
        assert_eq!(state.counts, vec![0, 0, 1, 0]);
        assert!(state.residual(after.as_slice()) < 1e-12);
    }

    #[test]
    fn variance_increment_for_uniform_two_arms() {
        let env = BanditEnv::point_mass(vec![1.0, 0.0], 1.0).unwrap();
        let before = Parameters::zeros(2).unwrap();
        let pi = softmax(&before).unwrap();
        let after = step_direct(&before, &UpdateInputs::new(1.0, 0, 1.0).unwrap(), &pi).unwrap();
        let mut state = DiagnosticsState::new(before.as_slice());
        state.record_step(&env, &pi, 1.0, 0, &after, &before);
        for v in &state.variance_proxy {
            assert!((v - 5.0 / 72.0).abs() < 1e-15);
        }
    }

    #[test]
    fn variance_increment_vanishes_for_one_hot() {
        let env = BanditEnv::point_mass(vec![1.0, 0.0], 1.0).unwrap();
        let theta = [0.0, 0.0];
        let mut state = DiagnosticsState::new(&theta);
        state.record_slices(env.means(), &[1.0, 0.0], 1.0, 0, &theta, &theta);
        assert_eq!(state.variance_proxy, vec![0.0, 0.0]);
    }

    #[test]
    fn envelope_near_delta_one() {
        // Independent evaluation of the three terms at v = 0, delta = 1 - 1e-6.
        let delta: f64 = 0.999999;
        let l = (1.0 / delta).ln();
        let expected = 36.0 * (4.0 / 3.0 * l).sqrt() + 12.0 * l + 8.0 * 3f64.ln();
        let got = freedman_envelope(0.0, delta, 1.0, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-12);
        // frozen: 8 ln 3 = 8.78890 plus ~0.0416 from the square-root term
        assert!((got - 8.830_479_539).abs() < 1e-8, "{got}");
        let scaled = freedman_envelope(0.0, delta, 2.0, 3.0).unwrap();
        assert!((scaled - 6.0 * got).abs() < 1e-12);
    }

    #[test]
    fn envelope_monotonicity() {
        let e0 = freedman_envelope(0.0, 0.05, 1.0, 1.0).unwrap();
        let e1 = freedman_envelope(1.0, 0.05, 1.0, 1.0).unwrap();
        assert!(e1 > e0);
        let loose = freedman_envelope(1.0, 0.01, 1.0, 1.0).unwrap();
        assert!(loose > e1);
    }

    #[test]
    fn envelope_rejects_bad_delta() {
        for d in [0.0, 1.0, -0.5, 2.0, f64::NAN] {
            assert!(freedman_envelope(1.0, d, 1.0, 1.0).is_err());
        }
        assert!(freedman_envelope(-1.0, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn summary_of_forced_sampler_is_starved() {
        let s = summarize_counts(&[100, 0, 0, 0]);
        assert_eq!(s.second_count, 0);
        assert!(s.starved);
        assert_eq!(s.top_two_share, 1.0);
        let s = summarize_counts(&[10, 60, 20, 10]);
        assert_eq!(s.sorted_counts, vec![60, 20, 10, 10]);
        assert_eq!(s.sorted_counts.iter().sum::<u64>(), 100);
        assert!((s.top_two_share - 0.8).abs() < 1e-15);
    }
}
