use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{DiagLevel, ExperimentConfig};
use super::schedule::checkpoint_schedule;
use super::trace::{log_suboptimality, CheckpointRow, RunKey, RunTrace, TerminalSummary};
use crate::algorithm::{apply_direct, check_eta};
use crate::diagnostics::DiagnosticsState;
use crate::env::suboptimality_slice;
use crate::error::{Error, Result};
use crate::policy::{sample_from_uniform, softmax_into};
use crate::rate_bounds::least_squares_slope;
use crate::rng::RandomStream;

/// What one iteration did, handed to observers of [`run_single_observed`].
#[derive(Debug)]
pub struct StepView<'a> {
    pub t: u64,
    pub action: usize,
    pub reward: f64,
    pub probs_before: &'a [f64],
    pub probs_after: &'a [f64],
    pub theta_after: &'a [f64],
    pub subopt_after: f64,
}

pub fn run_single(config: &ExperimentConfig, seed: u64, eta: f64) -> Result<RunTrace> {
    run_single_observed(config, seed, eta, |_| {})
}

/// Runs `config.horizon` iterations of sample, observe, update. Deterministic
/// in `(config, seed, eta)`; two random draws per iteration.
pub fn run_single_observed<F>(
    config: &ExperimentConfig,
    seed: u64,
    eta: f64,
    mut observer: F,
) -> Result<RunTrace>
where
    F: FnMut(&StepView<'_>),
{
    config.validate()?;
    check_eta(eta)?;
    let env = config.env.build()?;
    let means = env.means();
    let k = env.k();
    let optimal = env.optimal_arm();
    let horizon = config.horizon;

    let mut rng = RandomStream::new(config.master_seed, seed);
    let mut theta = config.theta_init();
    let mut probs = vec![0.0; k];
    softmax_into(&theta, &mut probs);
    let mut probs_before = vec![0.0; k];
    let mut theta_before = vec![0.0; k];
    let mut counts = vec![0u64; k];
    let mut diag = (config.diagnostics != DiagLevel::Off).then(|| DiagnosticsState::new(&theta));

    let schedule = match config.diagnostics {
        DiagLevel::PerStep => (1..=horizon).collect(),
        _ => checkpoint_schedule(horizon, config.checkpoint_ratio),
    };
    let mut next_checkpoint = schedule.iter().copied().peekable();
    let mut rows = Vec::with_capacity(schedule.len());
    let mut cum_subopt = 0.0;
    let mut subopt = suboptimality_slice(means, optimal, &probs);

    for t in 1..=horizon {
        let action = sample_from_uniform(&probs, rng.next_uniform());
        let reward = env.sample_unchecked(action, &mut rng);
        if diag.is_some() {
            theta_before.copy_from_slice(&theta);
        }
        apply_direct(&mut theta, &probs, action, eta, reward);
        if !theta.iter().all(|x| x.is_finite()) {
            return Err(Error::PoisonedState { step: t, seed, eta });
        }
        counts[action] += 1;
        if let Some(d) = diag.as_mut() {
            d.record_slices(means, &probs, eta, action, &theta, &theta_before);
        }
        std::mem::swap(&mut probs, &mut probs_before);
        softmax_into(&theta, &mut probs);
        subopt = suboptimality_slice(means, optimal, &probs);
        cum_subopt += subopt;

        observer(&StepView {
            t,
            action,
            reward,
            probs_before: &probs_before,
            probs_after: &probs,
            theta_after: &theta,
            subopt_after: subopt,
        });

        if next_checkpoint.peek() == Some(&t) {
            next_checkpoint.next();
            rows.push(CheckpointRow {
                t,
                subopt,
                pi_star: probs[optimal],
                counts: counts.clone(),
                theta: theta.clone(),
                cum_subopt,
                diagnostics: diag.as_ref().map(|d| d.snapshot(&theta)),
            });
        }
    }

    Ok(RunTrace {
        seed,
        eta,
        k,
        optimal_arm: optimal,
        r_max: env.r_max(),
        horizon,
        rows,
        terminal: TerminalSummary {
            t: horizon,
            subopt,
            pi_star: probs[optimal],
            counts,
            theta,
        },
    })
}

#[derive(Debug)]
pub struct RunFailure {
    pub key: RunKey,
    pub error: Error,
}

/// Completed traces sorted by `(eta, seed)`, plus the runs that failed.
#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub traces: Vec<RunTrace>,
    pub failures: Vec<RunFailure>,
}

impl SweepOutcome {
    pub fn get(&self, eta: f64, seed: u64) -> Option<&RunTrace> {
        self.traces.iter().find(|t| t.eta == eta && t.seed == seed)
    }

    pub fn for_eta(&self, eta: f64) -> Vec<&RunTrace> {
        self.traces.iter().filter(|t| t.eta == eta).collect()
    }
}

/// Runs every `(seed, eta)` pair. A failing run is recorded with its key and
/// does not stop the others. `parallelism` caps the worker count.
pub fn run_sweep(config: &ExperimentConfig, parallelism: Option<usize>) -> Result<SweepOutcome> {
    config.validate()?;
    let mut keys: Vec<RunKey> = config
        .etas
        .iter()
        .flat_map(|&eta| config.seeds.iter().map(move |&seed| RunKey { eta, seed }))
        .collect();
    keys.sort();

    let work = || -> Vec<(RunKey, Result<RunTrace>)> {
        keys.par_iter()
            .map(|&key| (key, run_single(config, key.seed, key.eta)))
            .collect()
    };
    let results = match parallelism {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut outcome = SweepOutcome::default();
    for (key, result) in results {
        match result {
            Ok(trace) => outcome.traces.push(trace),
            Err(error) => outcome.failures.push(RunFailure { key, error }),
        }
    }
    Ok(outcome)
}

/// Mean over runs of the floored log sub-optimality at each checkpoint time.
pub fn mean_log_subopt<'a, I>(traces: I) -> Vec<(u64, f64)>
where
    I: IntoIterator<Item = &'a RunTrace>,
{
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for trace in traces {
        for row in &trace.rows {
            let entry = acc.entry(row.t).or_insert((0.0, 0));
            entry.0 += log_suboptimality(row.subopt).0;
            entry.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(t, (sum, n))| (t, sum / n as f64))
        .collect()
}

/// Least-squares slope of `y` against `ln t` over checkpoints with
/// `t >= t_last / 10`.
pub fn final_decade_slope(points: &[(u64, f64)]) -> Option<f64> {
    let last = points.last()?.0 as f64;
    let tail: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, _)| *t as f64 >= last / 10.0)
        .map(|&(t, y)| ((t as f64).ln(), y))
        .collect();
    (tail.len() >= 2).then(|| least_squares_slope(&tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{EnvConfig, KindName};

    fn small_config(kind: KindName, horizon: u64) -> ExperimentConfig {
        ExperimentConfig {
            env: EnvConfig {
                means: vec![1.0, 0.0],
                kind,
                sigma: Some(crate::experiment::config::Sigma::Shared(0.1)),
                r_max: 1.0,
            },
            etas: vec![1.0],
            seeds: vec![0],
            horizon,
            checkpoint_ratio: 1.1,
            diagnostics: DiagLevel::Off,
            theta_init: None,
            master_seed: 0,
        }
    }

    #[test]
    fn empty_run_has_no_rows() {
        let trace = run_single(&small_config(KindName::PointMass, 0), 0, 1.0).unwrap();
        assert!(trace.rows.is_empty());
        assert_eq!(trace.terminal.theta, vec![0.0, 0.0]);
        assert_eq!(trace.terminal.counts, vec![0, 0]);
        assert!((trace.terminal.subopt - 0.5).abs() < 1e-15);
    }

    #[test]
    fn point_mass_run_improves() {
        let trace = run_single(&small_config(KindName::PointMass, 1000), 4, 1.0).unwrap();
        let first = &trace.rows[0];
        assert_eq!(first.t, 1);
        assert!(trace.terminal.subopt < first.subopt);
    }

    #[test]
    fn runs_are_reproducible() {
        let config = small_config(KindName::Gaussian, 5000);
        assert_eq!(
            run_single(&config, 9, 10.0).unwrap(),
            run_single(&config, 9, 10.0).unwrap()
        );
        assert_ne!(
            run_single(&config, 9, 10.0).unwrap(),
            run_single(&config, 8, 10.0).unwrap()
        );
    }

    #[test]
    fn counts_match_time_at_every_row() {
        let mut config = small_config(KindName::Gaussian, 3000);
        config.diagnostics = DiagLevel::Checkpointed;
        let trace = run_single(&config, 1, 100.0).unwrap();
        for row in &trace.rows {
            assert_eq!(row.counts.iter().sum::<u64>(), row.t);
            assert!(row.subopt >= 0.0);
            assert!(row.diagnostics.is_some());
        }
        assert!(trace.rows.windows(2).all(|w| w[0].t < w[1].t));
    }

    fn overflowing_config() -> ExperimentConfig {
        let mut config = small_config(KindName::PointMass, 50);
        config.env.means = vec![1.0, 0.5];
        config.theta_init = Some(vec![1.7e308, 1.7e308]);
        config
    }

    #[test]
    fn overflowing_learning_rate_poisons_run() {
        let config = overflowing_config();
        let err = run_single(&config, 0, 1e308).unwrap_err();
        assert!(matches!(err, Error::PoisonedState { step, .. } if step == 1));
    }

    #[test]
    fn sweep_isolates_failures() {
        let mut config = overflowing_config();
        config.etas = vec![1.0, 1e308];
        config.seeds = vec![0, 1];
        let outcome = run_sweep(&config, Some(2)).unwrap();
        assert_eq!(outcome.traces.len(), 2);
        assert_eq!(outcome.failures.len(), 2);
        assert!(outcome.failures.iter().all(|f| f.key.eta == 1e308));
    }

    #[test]
    fn observer_sees_every_step() {
        let config = small_config(KindName::Bernoulli, 200);
        let mut seen = 0;
        let trace = run_single_observed(&config, 0, 1.0, |view| {
            seen += 1;
            assert_eq!(view.t, seen);
            assert!(view.reward == 1.0 || view.reward == -1.0);
        })
        .unwrap();
        assert_eq!(seen, 200);
        assert_eq!(trace.terminal.counts.iter().sum::<u64>(), 200);
    }

    #[test]
    fn slope_of_final_decade() {
        let pts: Vec<(u64, f64)> = (1..=100)
            .map(|i| {
                let t = i * 1000;
                (t, -(t as f64).ln())
            })
            .collect();
        assert!((final_decade_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
    }
}
