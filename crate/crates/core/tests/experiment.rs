use gradbandit::diagnostics::{envelope_violation_test, DiagnosticsSnapshot};
use gradbandit::experiment::{
    emit_plot_data, log_suboptimality, paper_default_config, read_trace_csv, run_single,
    run_single_observed, run_sweep, write_trace_csv, CheckpointRow, EnvConfig, KindName,
    TerminalSummary, LOG_SUBOPT_FLOOR,
};
use gradbandit::rate_bounds::{
    average_suboptimality_bound_check, calibrate_rate_constant, choose_tau,
    dominated_sequence_check, RecurrenceSpec,
};
use gradbandit::{DiagLevel, ExperimentConfig, RunTrace};

fn short_default(horizon: u64) -> ExperimentConfig {
    let mut config = paper_default_config();
    config.horizon = horizon;
    config
}

fn point_mass(means: Vec<f64>, etas: Vec<f64>, horizon: u64) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvConfig {
            means,
            kind: KindName::PointMass,
            sigma: None,
            r_max: 1.0,
        },
        etas,
        seeds: vec![0, 1],
        horizon,
        checkpoint_ratio: 1.1,
        diagnostics: DiagLevel::Off,
        theta_init: None,
        master_seed: 0,
    }
}

#[test]
fn default_sweep_has_forty_runs() {
    let outcome = run_sweep(&short_default(2000), None).unwrap();
    assert_eq!(outcome.traces.len(), 40);
    assert!(outcome.failures.is_empty());
    for eta in [1.0, 10.0, 100.0, 1000.0] {
        assert_eq!(outcome.for_eta(eta).len(), 10);
    }
}

#[test]
fn seed_order_and_thread_count_do_not_matter() {
    let config = short_default(3000);
    let mut permuted = config.clone();
    permuted.seeds.reverse();
    permuted.etas.reverse();
    let a = run_sweep(&config, Some(1)).unwrap();
    let b = run_sweep(&permuted, Some(4)).unwrap();
    assert_eq!(a.traces, b.traces);
}

#[test]
fn trace_csv_is_deterministic_and_round_trips() {
    let config = short_default(5000);
    let traces = run_sweep(&config, None).unwrap().traces;
    let mut first = Vec::new();
    let mut second = Vec::new();
    write_trace_csv(&traces, &mut first).unwrap();
    write_trace_csv(&run_sweep(&config, Some(3)).unwrap().traces, &mut second).unwrap();
    assert_eq!(first, second);

    let rows = read_trace_csv(first.as_slice()).unwrap();
    assert_eq!(
        rows.len(),
        traces.iter().map(|t| t.rows.len()).sum::<usize>()
    );
    for trace in &traces {
        let parsed: Vec<_> = rows
            .iter()
            .filter(|r| r.seed == trace.seed && r.eta == trace.eta)
            .collect();
        for (row, back) in trace.rows.iter().zip(parsed) {
            assert_eq!(back.t, row.t);
            assert_eq!(back.subopt, row.subopt);
            assert_eq!(back.pi_star, row.pi_star);
            assert_eq!(back.counts, row.counts);
            assert_eq!(back.theta, row.theta);
        }
    }
}

#[test]
fn plot_data_has_one_file_per_eta() {
    let traces = run_sweep(&short_default(2000), None).unwrap().traces;
    let mut csv = Vec::new();
    write_trace_csv(&traces, &mut csv).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plot_data(&read_trace_csv(csv.as_slice()).unwrap(), dir.path()).unwrap();
    assert_eq!(files.len(), 4);
    for f in &files {
        assert_eq!(f.seeds, 10);
        let text = std::fs::read_to_string(&f.path).unwrap();
        assert_eq!(text.lines().count(), f.rows + 1);
    }
    assert!(emit_plot_data(&[], dir.path()).is_err());
}

#[test]
fn saturated_policy_is_flagged_as_underflow() {
    let mut config = point_mass(vec![0.5, -0.5], vec![1.0], 50);
    config.theta_init = Some(vec![800.0, 0.0]);
    let trace = run_single(&config, 0, 1.0).unwrap();
    let row = trace.rows.last().unwrap();
    assert_eq!(row.subopt, 0.0);
    assert_eq!(row.log_subopt(), (LOG_SUBOPT_FLOOR, true));
    assert_eq!(log_suboptimality(1e-320), (1e-320f64.ln(), false));
    assert_eq!(log_suboptimality(0.0), (LOG_SUBOPT_FLOOR, true));

    let mut csv = Vec::new();
    write_trace_csv(&[trace], &mut csv).unwrap();
    assert!(read_trace_csv(csv.as_slice())
        .unwrap()
        .iter()
        .all(|r| r.underflow));
}

#[test]
fn zero_gap_checks_to_zero_constant() {
    let mut config = point_mass(vec![0.5, -0.5], vec![1.0], 10_000);
    config.theta_init = Some(vec![800.0, 0.0]);
    let trace = run_single(&config, 0, 1.0).unwrap();
    let tau = choose_tau(&trace).unwrap();
    assert_eq!(tau, 1);
    let check = average_suboptimality_bound_check(&trace, tau).unwrap();
    assert_eq!(check.c_fit, 0.0);
    assert!(check.holds);
}

#[test]
fn frozen_policy_fails_the_rate_check() {
    // Tiny step size: the gap stays essentially constant, so the required
    // constant grows like T / ln T.
    let mut config = point_mass(vec![0.2, 0.05, -0.1, -0.4], vec![1e-12], 100_000);
    config.theta_init = Some(vec![2.0, 0.0, 0.0, 0.0]);
    let trace = run_single(&config, 0, 1e-12).unwrap();
    let check = average_suboptimality_bound_check(&trace, choose_tau(&trace).unwrap()).unwrap();
    assert!(check.constant_growth > 0.9, "{check:?}");
    assert!(!check.holds);
}

#[test]
fn converging_run_passes_the_rate_check() {
    let mut config = short_default(100_000);
    config.etas = vec![1.0];
    let trace = run_single(&config, 2, 1.0).unwrap();
    let check = average_suboptimality_bound_check(&trace, choose_tau(&trace).unwrap()).unwrap();
    assert!(check.holds, "{check:?}");
}

#[test]
fn cumulative_exploration_is_dominated_by_the_recurrence() {
    let mut config = short_default(20_000);
    config.etas = vec![1.0];
    let k = config.env.means.len();
    let optimal = 0;
    let tau = 200;
    let mut x = Vec::new();
    let mut total = 0.0;
    run_single_observed(&config, 1, 1.0, |step| {
        if step.t >= tau {
            total += 1.0 - step.probs_after[optimal];
            x.push(total);
        }
    })
    .unwrap();
    let b = (k - 1) as f64;
    let c = calibrate_rate_constant(&x, b).expect("binding steps exist");
    assert!(c > 0.0);
    let floor = RecurrenceSpec::minimal(b, c, 0).unwrap().y0;
    let spec = RecurrenceSpec::new(b, c, floor.max(x[0]), x.len() - 1).unwrap();
    assert!(dominated_sequence_check(&spec, &x).unwrap());

    // A larger constant claims faster growth than the data allow.
    let too_big = RecurrenceSpec::new(b, c * 1.5, floor.max(x[0]) * 10.0, x.len() - 1).unwrap();
    assert!(dominated_sequence_check(&too_big, &x).is_err());
}

#[test]
fn loose_envelope_is_violated_at_the_binomial_rate() {
    let config = ExperimentConfig {
        env: EnvConfig {
            means: vec![0.2, 0.05, -0.1, -0.4],
            kind: KindName::Bernoulli,
            sigma: None,
            r_max: 1.0,
        },
        etas: vec![1.0],
        seeds: (0..200).collect(),
        horizon: 500,
        checkpoint_ratio: 1.1,
        diagnostics: DiagLevel::PerStep,
        theta_init: None,
        master_seed: 3,
    };
    let traces = run_sweep(&config, None).unwrap().traces;
    for arm in 0..4 {
        let report = envelope_violation_test(&traces, arm, 0.999).unwrap();
        assert!(report.rate <= report.binomial_limit(), "{report:?}");
    }
}

fn synthetic_trace(noise: f64) -> RunTrace {
    let rows = (1..=10)
        .map(|t| CheckpointRow {
            t,
            subopt: 0.1,
            pi_star: 0.5,
            counts: vec![t, 0],
            theta: vec![0.0, 0.0],
            cum_subopt: 0.1 * t as f64,
            diagnostics: Some(DiagnosticsSnapshot {
                cum_progress: vec![0.0; 2],
                cum_noise: vec![noise, -noise],
                variance_proxy: vec![0.0; 2],
                residual: 0.0,
            }),
        })
        .collect();
    RunTrace {
        seed: 0,
        eta: 1.0,
        k: 2,
        optimal_arm: 0,
        r_max: 1.0,
        horizon: 10,
        rows,
        terminal: TerminalSummary {
            t: 10,
            subopt: 0.1,
            pi_star: 0.5,
            counts: vec![10, 0],
            theta: vec![0.0; 2],
        },
    }
}

#[test]
fn envelope_test_counts_runs_not_steps() {
    let quiet = synthetic_trace(0.0);
    let loud = synthetic_trace(1e6);
    let report = envelope_violation_test(&[quiet.clone(), loud, quiet], 1, 0.05).unwrap();
    assert_eq!(report.violations, 1);
    assert!((report.rate - 1.0 / 3.0).abs() < 1e-15);
    assert!(envelope_violation_test(&[], 0, 0.05).is_err());
    assert!(envelope_violation_test(&[synthetic_trace(0.0)], 2, 0.05).is_err());
}
