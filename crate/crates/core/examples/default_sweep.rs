//! Runs the four-arm sweep (4 learning rates x 10 seeds x 1e6 steps) and
//! prints the final log sub-optimality of every run.
//!
//!     cargo run --release -p gradbandit --example default_sweep

use gradbandit::experiment::{
    final_decade_slope, log_suboptimality, mean_log_subopt, paper_default_config, run_sweep,
};
use gradbandit::rate_bounds::{average_suboptimality_bound_check, choose_tau};

fn main() -> gradbandit::Result<()> {
    let config = paper_default_config();
    let started = std::time::Instant::now();
    let outcome = run_sweep(&config, None)?;
    println!("{} runs in {:.1?}", outcome.traces.len(), started.elapsed());
    for &eta in &config.etas {
        let runs = outcome.for_eta(eta);
        let finals: Vec<String> = runs
            .iter()
            .map(|t| format!("{:.1}", log_suboptimality(t.terminal.subopt).0))
            .collect();
        let slope = final_decade_slope(&mean_log_subopt(runs.iter().copied()));
        println!("eta {eta:>6}: final log subopt {finals:?}, final-decade slope {slope:?}");
        for t in &runs {
            if let Some(tau) = choose_tau(t) {
                let check = average_suboptimality_bound_check(t, tau)?;
                println!(
                    "    seed {} tau {} c_fit {:.4} growth {:.3} holds {}",
                    t.seed, check.tau, check.c_fit, check.constant_growth, check.holds
                );
            }
        }
    }
    Ok(())
}
