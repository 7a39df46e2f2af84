//! `gradbandit`: run sweeps, verify invariants, check rates, emit plot data.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 usage or IO error, 3 poisoned run.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gradbandit::experiment::{
    emit_plot_data, final_decade_slope, mean_log_subopt, paper_default_config, read_trace_csv,
    run_sweep, summary_json, two_action_config, write_diagnostics_csv, write_trace_csv, DiagLevel,
    ExperimentConfig, SweepOutcome,
};
use gradbandit::rate_bounds::{average_suboptimality_bound_check, choose_tau};
use gradbandit::{verify, Error};

const SEED_BASE_VAR: &str = "GRADBANDIT_SEED_BASE";

#[derive(Parser)]
#[command(
    name = "gradbandit",
    version,
    about = "Softmax gradient bandit simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write trace.csv and summary.json.
    Run(RunArgs),
    /// Same as `run`; conventionally used for multi-seed, multi-eta configs.
    Sweep(RunArgs),
    /// Run the built-in property suites.
    Verify(VerifyArgs),
    /// Fit the average sub-optimality rate constant for every run.
    RateCheck(RunArgs),
    /// Turn a trace CSV into per-eta plot data files.
    EmitPlots(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DiagArg {
    Off,
    Ckpt,
    Step,
}

impl From<DiagArg> for DiagLevel {
    fn from(d: DiagArg) -> Self {
        match d {
            DiagArg::Off => DiagLevel::Off,
            DiagArg::Ckpt => DiagLevel::Checkpointed,
            DiagArg::Step => DiagLevel::PerStep,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long, conflicts_with_all = ["paper_default", "two_action"])]
    config: Option<PathBuf>,
    /// Four-arm Gaussian setup (the default when no config is given).
    #[arg(long, conflicts_with = "two_action")]
    paper_default: bool,
    /// Two-arm Gaussian setup.
    #[arg(long)]
    two_action: bool,
    /// Learning rates, comma separated.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    /// Use seeds 0..N.
    #[arg(long, conflicts_with = "seed")]
    seeds: Option<u64>,
    /// Use this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon (number of iterations).
    #[arg(long = "T")]
    horizon: Option<u64>,
    #[arg(long, value_enum)]
    diag: Option<DiagArg>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for the sweep.
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run only this suite (repeatable).
    #[arg(long)]
    suite: Vec<String>,
    /// Also write the report as JSON into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Trace CSV to read; defaults to OUT/trace.csv.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory for plot files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Verification,
    Poisoned(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::PoisonedState { .. } => Failure::Poisoned(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match &args.config {
        Some(path) if !path.exists() => {
            return Err(Failure::Usage(format!(
                "config {} not found",
                path.display()
            )))
        }
        Some(path) => ExperimentConfig::from_file(path)?,
        None if args.two_action => two_action_config(),
        None => paper_default_config(),
    };
    if let Some(eta) = &args.eta {
        config.etas = eta.clone();
    }
    if let Some(n) = args.seeds {
        config.seeds = (0..n).collect();
    }
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if let Some(t) = args.horizon {
        config.horizon = t;
    }
    if let Some(d) = args.diag {
        config.diagnostics = d.into();
    }
    if let Ok(base) = std::env::var(SEED_BASE_VAR) {
        config.master_seed = base
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_BASE_VAR} must be a u64, got {base:?}")))?;
    }
    config.validate()?;
    Ok(config)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    fs::write(path, text + "\n")?;
    Ok(())
}

fn report_failures(outcome: &SweepOutcome) -> Result<(), Failure> {
    for f in &outcome.failures {
        eprintln!(
            "run eta={} seed={} failed: {}",
            f.key.eta, f.key.seed, f.error
        );
    }
    match outcome.failures.first() {
        Some(f) => Err(Failure::from(Error::PoisonedState {
            step: match f.error {
                Error::PoisonedState { step, .. } => step,
                _ => 0,
            },
            seed: f.key.seed,
            eta: f.key.eta,
        })),
        None => Ok(()),
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let config = resolve_config(args)?;
    fs::create_dir_all(&args.out)?;
    eprintln!(
        "running {} etas x {} seeds, T = {}",
        config.etas.len(),
        config.seeds.len(),
        config.horizon
    );
    let outcome = run_sweep(&config, args.parallel)?;
    fs::write(args.out.join("config.toml"), config.to_toml_string())?;
    let trace_path = args.out.join("trace.csv");
    if outcome.traces.iter().any(|t| !t.rows.is_empty()) {
        write_trace_csv(&outcome.traces, BufWriter::new(File::create(&trace_path)?))?;
    } else if trace_path.exists() {
        fs::remove_file(&trace_path)?;
    }
    let diag_path = args.out.join("diagnostics.csv");
    if config.diagnostics != DiagLevel::Off {
        write_diagnostics_csv(&outcome.traces, BufWriter::new(File::create(&diag_path)?))?;
    } else if diag_path.exists() {
        fs::remove_file(&diag_path)?;
    }
    let summary = summary_json(&config, &outcome);
    write_json(&args.out.join("summary.json"), &summary)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary["runs"]).expect("json")
    );
    report_failures(&outcome)
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let names: Vec<String> = if args.suite.is_empty() {
        verify::SUITES.iter().map(|s| s.to_string()).collect()
    } else {
        args.suite.clone()
    };
    let mut reports = Vec::new();
    for name in &names {
        let report = verify::run_suite(name)?;
        for check in &report.checks {
            let status = if check.passed { "PASS" } else { "FAIL" };
            println!(
                "{status} {}::{}  {}",
                report.suite, check.name, check.detail
            );
        }
        println!(
            "suite {}: {}",
            report.suite,
            if report.passed() { "pass" } else { "FAIL" }
        );
        reports.push(report);
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        write_json(
            &dir.join("verify.json"),
            &serde_json::to_value(&reports).expect("json"),
        )?;
    }
    if reports.iter().all(|r| r.passed()) {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_rate_check(args: &RunArgs) -> Result<(), Failure> {
    let config = resolve_config(args)?;
    let outcome = run_sweep(&config, args.parallel)?;
    let mut runs = Vec::new();
    let mut per_eta = Vec::new();
    for &eta in &config.etas {
        let traces = outcome.for_eta(eta);
        let slope = final_decade_slope(&mean_log_subopt(traces.iter().copied()));
        println!("eta {eta}: final-decade slope of mean log subopt = {slope:?}");
        per_eta.push(serde_json::json!({"eta": eta, "final_decade_slope": slope}));
        for trace in traces {
            let entry = match choose_tau(trace) {
                Some(tau) => {
                    let check = average_suboptimality_bound_check(trace, tau)?;
                    println!(
                        "  seed {:>4}: tau {:>8}  c_fit {:.6e}  growth {:+.3}  holds {}",
                        trace.seed, check.tau, check.c_fit, check.constant_growth, check.holds
                    );
                    serde_json::json!({"eta": eta, "seed": trace.seed, "check": check})
                }
                None => {
                    println!("  seed {:>4}: pi(a*) never reached 1/2", trace.seed);
                    serde_json::json!({"eta": eta, "seed": trace.seed, "check": null})
                }
            };
            runs.push(entry);
        }
    }
    fs::create_dir_all(&args.out)?;
    write_json(
        &args.out.join("rate_check.json"),
        &serde_json::json!({"etas": per_eta, "runs": runs}),
    )?;
    report_failures(&outcome)
}

fn cmd_emit_plots(args: &PlotArgs) -> Result<(), Failure> {
    let input = args
        .input
        .clone()
        .unwrap_or_else(|| args.out.join("trace.csv"));
    let file = File::open(&input)
        .map_err(|e| Failure::Usage(format!("cannot open {}: {e}", input.display())))?;
    let rows = read_trace_csv(file)?;
    for plot in emit_plot_data(&rows, &args.out)? {
        println!(
            "eta {}: {} seeds, {} rows -> {}",
            plot.eta,
            plot.seeds,
            plot.rows,
            plot.path.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) | Command::Sweep(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::RateCheck(args) => cmd_rate_check(args),
        Command::EmitPlots(args) => cmd_emit_plots(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Poisoned(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
