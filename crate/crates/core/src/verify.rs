//! Self-contained property suites, run by the `verify` command.
//!
//! Every suite draws its random cases from fixed seeds, so a report is
//! reproducible bit for bit.

use serde::Serialize;

use crate::algorithm::{
    exact_gradient, expected_update, is_estimate, step_direct, step_sga, UpdateInputs,
};
use crate::diagnostics::{envelope_violation_test, freedman_envelope};
use crate::env::BanditEnv;
use crate::error::{Error, Result};
use crate::experiment::{
    checkpoint_schedule, paper_default_config, run_single, run_sweep, write_trace_csv, DiagLevel,
    EnvConfig, ExperimentConfig, KindName, Sigma,
};
use crate::policy::{argmax, sample_action, softmax, softmax_jacobian, Parameters, PolicyDist};
use crate::rate_bounds::{
    check_bound_along, dominated_sequence_check, iterate_recurrence, log_bound, scaled_log_bound,
    standard_grid, RecurrenceSpec,
};
use crate::rng::RandomStream;

pub const SUITES: [&str; 10] = [
    "policy",
    "environment",
    "equivalence",
    "unbiasedness",
    "algorithm",
    "decomposition",
    "martingale",
    "freedman",
    "recurrence",
    "experiment",
];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.to_string(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_suite(name: &str) -> Result<SuiteReport> {
    match name {
        "policy" => Ok(policy_suite()),
        "environment" => environment_suite(),
        "equivalence" => Ok(equivalence_with(step_direct)),
        "unbiasedness" => unbiasedness_suite(),
        "algorithm" => algorithm_suite(),
        "decomposition" => decomposition_suite(),
        "martingale" => martingale_suite(),
        "freedman" => freedman_suite(),
        "recurrence" => recurrence_suite(),
        "experiment" => experiment_suite(),
        other => Err(Error::InvalidInput(format!(
            "unknown suite {other:?}; expected one of {}",
            SUITES.join(", ")
        ))),
    }
}

pub fn run_all() -> Result<Vec<SuiteReport>> {
    SUITES.iter().map(|s| run_suite(s)).collect()
}

fn uniform_in(rng: &mut RandomStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_uniform()
}

fn random_theta(rng: &mut RandomStream, k: usize, bound: f64) -> Parameters {
    Parameters::new((0..k).map(|_| uniform_in(rng, -bound, bound)).collect()).expect("finite")
}

fn random_k(rng: &mut RandomStream) -> usize {
    2 + (rng.next_u64() % 7) as usize
}

/// Distinct means in `[-1, 1]`.
fn random_means(rng: &mut RandomStream, k: usize) -> Vec<f64> {
    loop {
        let means: Vec<f64> = (0..k).map(|_| uniform_in(rng, -1.0, 1.0)).collect();
        let distinct = (0..k).all(|i| (i + 1..k).all(|j| means[i] != means[j]));
        if distinct {
            return means;
        }
    }
}

/// Central finite-difference Jacobian of softmax, column `j` = d pi / d theta_j.
pub fn finite_difference_jacobian(theta: &[f64], h: f64) -> Vec<Vec<f64>> {
    let k = theta.len();
    let mut jac = vec![vec![0.0; k]; k];
    for j in 0..k {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let p = softmax(&Parameters::new(plus).expect("finite")).expect("finite");
        let m = softmax(&Parameters::new(minus).expect("finite")).expect("finite");
        for (i, row) in jac.iter_mut().enumerate() {
            row[j] = (p.prob(i) - m.prob(i)) / (2.0 * h);
        }
    }
    jac
}

fn policy_suite() -> SuiteReport {
    let mut report = SuiteReport::new("policy");
    let mut rng = RandomStream::new(0, 101);
    let (mut worst_sum, mut all_positive) = (0.0f64, true);
    let (mut worst_shift, mut argmax_ok) = (0.0f64, true);
    let mut worst_fd = 0.0f64;
    for _ in 0..200 {
        let k = random_k(&mut rng);
        let theta = random_theta(&mut rng, k, 5.0);
        let pi = softmax(&theta).expect("finite");
        all_positive &= pi.as_slice().iter().all(|&p| p > 0.0);
        worst_sum = worst_sum.max((pi.as_slice().iter().sum::<f64>() - 1.0).abs());
        let c = uniform_in(&mut rng, -100.0, 100.0);
        let shifted = Parameters::new(theta.as_slice().iter().map(|t| t + c).collect()).unwrap();
        let q = softmax(&shifted).unwrap();
        for (a, b) in pi.as_slice().iter().zip(q.as_slice()) {
            worst_shift = worst_shift.max((a - b).abs());
        }
        argmax_ok &= argmax(pi.as_slice()) == argmax(theta.as_slice());
        let analytic = softmax_jacobian(&pi);
        let numeric = finite_difference_jacobian(theta.as_slice(), 1e-6);
        for (ra, rn) in analytic.iter().zip(&numeric) {
            for (a, n) in ra.iter().zip(rn) {
                worst_fd = worst_fd.max((a - n).abs());
            }
        }
    }
    report.check("positive", all_positive, "every softmax entry > 0");
    report.check(
        "normalized",
        worst_sum <= 1e-12,
        format!("max |sum - 1| = {worst_sum:e}"),
    );
    report.check(
        "shift_invariant",
        worst_shift <= 1e-12,
        format!("max diff = {worst_shift:e}"),
    );
    report.check("argmax_preserved", argmax_ok, "argmax(pi) == argmax(theta)");
    report.check(
        "jacobian_finite_difference",
        worst_fd <= 1e-6,
        format!("max abs error = {worst_fd:e} at h = 1e-6"),
    );
    report
}

fn environment_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("environment");
    let mut rng = RandomStream::new(0, 102);
    let (mut nonneg, mut linear_err) = (true, 0.0f64);
    let mut zero_at_optimum = true;
    for _ in 0..200 {
        let k = random_k(&mut rng);
        let env = BanditEnv::point_mass(random_means(&mut rng, k), 1.0)?;
        let p1 = softmax(&random_theta(&mut rng, k, 5.0))?;
        let p2 = softmax(&random_theta(&mut rng, k, 5.0))?;
        nonneg &= env.suboptimality(&p1) > 0.0;
        let lambda = rng.next_uniform();
        let mix: Vec<f64> = p1
            .as_slice()
            .iter()
            .zip(p2.as_slice())
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        let total: f64 = mix.iter().sum();
        let mix = PolicyDist::new(mix.iter().map(|m| m / total).collect())?;
        let expected = lambda * env.suboptimality(&p1) + (1.0 - lambda) * env.suboptimality(&p2);
        linear_err = linear_err.max((env.suboptimality(&mix) - expected).abs());
        zero_at_optimum &= env.suboptimality(&PolicyDist::one_hot(k, env.optimal_arm())?) == 0.0;
    }
    report.check("nonnegative", nonneg, "subopt > 0 for interior policies");
    report.check(
        "zero_iff_optimal",
        zero_at_optimum,
        "subopt = 0 at one-hot a*",
    );
    report.check(
        "linear",
        linear_err <= 1e-12,
        format!("max deviation = {linear_err:e}"),
    );

    let env = BanditEnv::gaussian(vec![0.2, 0.05, -0.1, -0.4], 0.1, 1.0)?;
    let n = 100_000;
    let mut worst = 0.0f64;
    for arm in 0..4 {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += env.sample_reward(arm, &mut rng)?.value;
        }
        worst = worst.max((sum / n as f64 - env.means()[arm]).abs() / (0.1 / (n as f64).sqrt()));
    }
    report.check(
        "gaussian_mean",
        worst <= 6.0,
        format!("max |mean error| = {worst:.2} sigma/sqrt(n)"),
    );
    Ok(report)
}

type StepFn = fn(&Parameters, &UpdateInputs, &PolicyDist) -> Result<Parameters>;

/// Compares `step` against the gradient-ascent form on 1000 random states.
pub fn equivalence_with(step: StepFn) -> SuiteReport {
    let mut report = SuiteReport::new("equivalence");
    let mut rng = RandomStream::new(0, 103);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = random_k(&mut rng);
        let theta = random_theta(&mut rng, k, 10.0);
        let eta = 10f64.powf(uniform_in(&mut rng, -2.0, 3.0));
        let reward = uniform_in(&mut rng, -1.0, 1.0);
        let pi = softmax(&theta).expect("finite");
        let action = sample_action(&pi, &mut rng);
        let direct = match step(
            &theta,
            &UpdateInputs {
                eta,
                action,
                reward,
            },
            &pi,
        ) {
            Ok(p) => p,
            Err(e) => {
                report.check("direct_step", false, e.to_string());
                return report;
            }
        };
        let sga = step_sga(&theta, eta, &is_estimate(&pi, action, reward)).expect("valid");
        for (a, b) in direct.as_slice().iter().zip(sga.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    report.check(
        "direct_equals_sga",
        worst <= 1e-12,
        format!("max componentwise diff over 1000 states = {worst:e}"),
    );
    report
}

fn unbiasedness_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("unbiasedness");
    let mut rng = RandomStream::new(0, 104);
    let (mut worst_enum, mut worst_oracle) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let k = random_k(&mut rng);
        let env = BanditEnv::point_mass(random_means(&mut rng, k), 1.0)?;
        let theta = random_theta(&mut rng, k, 5.0);
        let eta = 10f64.powf(uniform_in(&mut rng, -2.0, 2.0));
        let pi = softmax(&theta)?;
        let grad = exact_gradient(&env, &pi);
        // Enumerate sampled arms through the public update.
        let mut mean_step = vec![0.0; k];
        for a in 0..k {
            let next = step_direct(&theta, &UpdateInputs::new(eta, a, env.means()[a])?, &pi)?;
            for (m, (n, t)) in mean_step
                .iter_mut()
                .zip(next.as_slice().iter().zip(theta.as_slice()))
            {
                *m += pi.prob(a) * (n - t);
            }
        }
        let expected = expected_update(&env, &pi, eta);
        for i in 0..k {
            worst_enum = worst_enum.max((mean_step[i] - eta * grad[i]).abs());
            worst_oracle = worst_oracle.max((expected[i] - eta * grad[i]).abs());
        }
    }
    report.check(
        "enumerated_mean_step",
        worst_enum <= 1e-12,
        format!("max diff = {worst_enum:e}"),
    );
    report.check(
        "expected_update",
        worst_oracle <= 1e-12,
        format!("max diff = {worst_oracle:e}"),
    );
    Ok(report)
}

fn algorithm_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("algorithm");
    let mut rng = RandomStream::new(0, 105);
    let mut worst_drift = 0.0f64;
    for _ in 0..1000 {
        let k = random_k(&mut rng);
        let theta = random_theta(&mut rng, k, 10.0);
        let pi = softmax(&theta)?;
        let action = sample_action(&pi, &mut rng);
        let inputs = UpdateInputs::new(
            10f64.powf(uniform_in(&mut rng, -2.0, 3.0)),
            action,
            uniform_in(&mut rng, -1.0, 1.0),
        )?;
        let next = step_direct(&theta, &inputs, &pi)?;
        let drift = next.as_slice().iter().sum::<f64>() - theta.as_slice().iter().sum::<f64>();
        worst_drift = worst_drift.max(drift.abs());
    }
    report.check(
        "logit_sum_invariant",
        worst_drift <= 1e-10,
        format!("max drift = {worst_drift:e}"),
    );

    let mut signs = true;
    for _ in 0..500 {
        let env = BanditEnv::point_mass(random_means(&mut rng, 2), 1.0)?;
        let pi = softmax(&random_theta(&mut rng, 2, 10.0))?;
        let p = expected_update(&env, &pi, uniform_in(&mut rng, 0.1, 100.0));
        let best = env.optimal_arm();
        signs &= p[best] > 0.0 && p[1 - best] < 0.0;
    }
    report.check(
        "two_arm_signs",
        signs,
        "progress > 0 on a*, < 0 on the other arm",
    );
    Ok(report)
}

fn gaussian_or_point(kind: KindName) -> EnvConfig {
    EnvConfig {
        means: vec![0.2, 0.05, -0.1, -0.4],
        kind,
        sigma: Some(Sigma::Shared(0.1)),
        r_max: 1.0,
    }
}

/// Decomposition and count identities on 20 runs of 10^4 steps.
fn decomposition_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("decomposition");
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    for kind in [KindName::PointMass, KindName::Gaussian] {
        let config = ExperimentConfig {
            env: gaussian_or_point(kind),
            etas: vec![1.0, 100.0],
            seeds: (0..5).collect(),
            horizon: 10_000,
            checkpoint_ratio: 1.1,
            diagnostics: DiagLevel::Checkpointed,
            theta_init: None,
            master_seed: 0,
        };
        let outcome = run_sweep(&config, None)?;
        for trace in &outcome.traces {
            for row in &trace.rows {
                let max_theta = row.theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
                let d = row.diagnostics.as_ref().expect("diagnostics on");
                worst = worst.max(d.residual / (1.0 + max_theta));
                counts_ok &= row.counts.iter().sum::<u64>() == row.t;
            }
        }
    }
    report.check(
        "decomposition",
        worst <= 1e-8,
        format!("max scaled residual = {worst:e}"),
    );
    report.check(
        "count_identity",
        counts_ok,
        "sum of counts equals t at every checkpoint",
    );

    // Online variance proxy against an offline recomputation from per-step policies.
    let config = ExperimentConfig {
        env: gaussian_or_point(KindName::Gaussian),
        etas: vec![10.0],
        seeds: vec![0],
        horizon: 2000,
        checkpoint_ratio: 1.1,
        diagnostics: DiagLevel::PerStep,
        theta_init: None,
        master_seed: 0,
    };
    let trace = run_single(&config, 0, 10.0)?;
    let mut offline = vec![0.0; 4];
    let mut probs = vec![0.25; 4];
    let mut worst_v = 0.0f64;
    for row in &trace.rows {
        for (v, p) in offline.iter_mut().zip(&probs) {
            *v += 5.0 / 18.0 * p * (1.0 - p);
        }
        let online = &row
            .diagnostics
            .as_ref()
            .expect("diagnostics on")
            .variance_proxy;
        for (a, b) in online.iter().zip(&offline) {
            worst_v = worst_v.max((a - b).abs());
        }
        probs = softmax(&Parameters::new(row.theta.clone())?)?
            .as_slice()
            .to_vec();
    }
    report.check(
        "variance_proxy_offline",
        worst_v <= 1e-9,
        format!("max diff = {worst_v:e}"),
    );
    Ok(report)
}

/// Mean of the one-step noise from a fixed state is zero.
fn martingale_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("martingale");
    let env = BanditEnv::bernoulli(vec![0.2, 0.05, -0.1, -0.4])?;
    let theta = Parameters::new(vec![0.5, -0.3, 0.1, -0.8])?;
    let pi = softmax(&theta)?;
    let eta = 2.0;
    let progress = expected_update(&env, &pi, eta);
    let mut rng = RandomStream::new(0, 106);
    let n = 10_000;
    let mut mean_noise = [0.0; 4];
    let mut bounded = true;
    for _ in 0..n {
        let a = sample_action(&pi, &mut rng);
        let r = env.sample_reward(a, &mut rng)?.value;
        let next = step_direct(&theta, &UpdateInputs::new(eta, a, r)?, &pi)?;
        for i in 0..4 {
            let w = next.as_slice()[i] - theta.as_slice()[i] - progress[i];
            bounded &= w.abs() <= 3.0 * eta * env.r_max();
            mean_noise[i] += w / n as f64;
        }
    }
    let limit = 6.0 * 3.0 * eta * env.r_max() / (n as f64).sqrt();
    let worst = mean_noise.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    report.check("noise_bounded", bounded, "|W| <= 3 eta R_max");
    report.check(
        "noise_mean_zero",
        worst <= limit,
        format!("max |mean W| = {worst:e}, limit {limit:e}"),
    );
    Ok(report)
}

fn freedman_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("freedman");
    let reports = freedman_violation_rates(1000, 1000, 1.0, &[0.05, 0.999])?;
    for r in reports {
        let limit = r.binomial_limit();
        report.check(
            &format!("arm_{}_delta_{}", r.arm + 1, r.delta),
            r.rate <= limit,
            format!(
                "violation rate {:.4} over {} runs, limit {limit:.4}",
                r.rate, r.runs
            ),
        );
    }
    let zero = freedman_envelope(0.0, 0.5, 1.0, 1.0)?;
    report.check(
        "envelope_positive",
        zero > 0.0,
        format!("envelope(0, 0.5) = {zero}"),
    );
    Ok(report)
}

/// Violation rates per `(delta, arm)` on the four-arm Bernoulli environment,
/// with every step recorded. Runs are processed in chunks to bound memory.
pub fn freedman_violation_rates(
    runs: u64,
    steps: u64,
    eta: f64,
    deltas: &[f64],
) -> Result<Vec<crate::diagnostics::ViolationReport>> {
    let mut config = ExperimentConfig {
        env: EnvConfig {
            means: vec![0.2, 0.05, -0.1, -0.4],
            kind: KindName::Bernoulli,
            sigma: None,
            r_max: 1.0,
        },
        etas: vec![eta],
        seeds: Vec::new(),
        horizon: steps,
        checkpoint_ratio: 1.1,
        diagnostics: DiagLevel::PerStep,
        theta_init: None,
        master_seed: 0,
    };
    let k = config.env.means.len();
    let mut violations = vec![0usize; deltas.len() * k];
    let chunk = 100;
    let mut start = 0;
    while start < runs {
        config.seeds = (start..(start + chunk).min(runs)).collect();
        let outcome = run_sweep(&config, None)?;
        for (i, &delta) in deltas.iter().enumerate() {
            for arm in 0..k {
                violations[i * k + arm] +=
                    envelope_violation_test(&outcome.traces, arm, delta)?.violations;
            }
        }
        start += chunk;
    }
    let mut out = Vec::new();
    for (i, &delta) in deltas.iter().enumerate() {
        for arm in 0..k {
            let v = violations[i * k + arm];
            out.push(crate::diagnostics::ViolationReport {
                arm,
                delta,
                runs: runs as usize,
                violations: v,
                rate: v as f64 / runs as f64,
            });
        }
    }
    Ok(out)
}

fn recurrence_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("recurrence");
    for spec in standard_grid(1_000_000) {
        let stated = check_bound_along(&spec, log_bound)?;
        report.check(
            &format!("log_bound_B{}_c{}", spec.b, spec.c),
            stated.violations == 0,
            format!(
                "violations = {}, first at n = {:?}, min margin = {:.6}",
                stated.violations, stated.first_violation, stated.min_margin
            ),
        );
        let scaled = check_bound_along(&spec, scaled_log_bound)?;
        report.check(
            &format!("scaled_log_bound_B{}_c{}", spec.b, spec.c),
            scaled.violations == 0,
            format!(
                "violations = {}, min margin = {:.6}",
                scaled.violations, scaled.min_margin
            ),
        );
    }
    // Two exact solutions started in order never cross.
    let low = RecurrenceSpec::minimal(2.0, 1.0, 10_000)?;
    let high = RecurrenceSpec {
        y0: low.y0 + 0.5,
        ..low
    };
    let (yl, yh) = (iterate_recurrence(&low), iterate_recurrence(&high));
    let ordered = yl.iter().zip(&yh).all(|(a, b)| a <= b);
    report.check("monotone_dominance", ordered, "ordered starts stay ordered");
    report.check(
        "dominated_sequence",
        dominated_sequence_check(&high, &yl)?,
        "lower exact solution is dominated",
    );
    Ok(report)
}

fn experiment_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("experiment");
    let mut config = paper_default_config();
    config.horizon = 20_000;
    config.etas = vec![10.0];
    config.seeds = vec![0, 1];
    let render = |c: &ExperimentConfig| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_trace_csv(&run_sweep(c, Some(2))?.traces, &mut buf)?;
        Ok(buf)
    };
    let first = render(&config)?;
    report.check(
        "deterministic_csv",
        first == render(&config)?,
        "byte-identical repeated output",
    );
    let mut permuted = config.clone();
    permuted.seeds.reverse();
    report.check(
        "order_independent",
        first == render(&permuted)?,
        "seed order does not change output",
    );
    let schedule = checkpoint_schedule(1_000_000, 1.1);
    report.check(
        "schedule",
        schedule.first() == Some(&1)
            && schedule.last() == Some(&1_000_000)
            && schedule.len() <= 200,
        format!("{} checkpoints for T = 1e6", schedule.len()),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flipped(
        params: &Parameters,
        inputs: &UpdateInputs,
        policy: &PolicyDist,
    ) -> Result<Parameters> {
        let next = step_direct(params, inputs, policy)?;
        let theta = params
            .as_slice()
            .iter()
            .zip(next.as_slice())
            .map(|(t, n)| t - (n - t))
            .collect();
        Parameters::new(theta)
    }

    #[test]
    fn sign_flip_breaks_equivalence() {
        assert!(equivalence_with(step_direct).passed());
        assert!(!equivalence_with(flipped).passed());
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(run_suite("nope").is_err());
    }

    #[test]
    fn fast_suites_pass() {
        for name in [
            "policy",
            "equivalence",
            "unbiasedness",
            "algorithm",
            "martingale",
        ] {
            let r = run_suite(name).unwrap();
            assert!(r.passed(), "{name}: {:?}", r.checks);
        }
    }
}
