//! Calibrates the second-most-sampled-arm threshold used by the exploration
//! acceptance check: 50 runs at eta = 1000, T = 1e5 on the four-arm Gaussian
//! setup, seeds 1000..1050 (disjoint from the seeds the check itself uses).
//!
//!     cargo run --release -p gradbandit --example exploration_pilot

use gradbandit::diagnostics::exploration_summary;
use gradbandit::experiment::{paper_default_config, run_sweep};

fn main() -> gradbandit::Result<()> {
    let mut config = paper_default_config();
    config.etas = vec![1000.0];
    config.seeds = (1000..1050).collect();
    config.horizon = 100_000;
    let outcome = run_sweep(&config, None)?;
    let mut seconds: Vec<u64> = outcome
        .traces
        .iter()
        .map(|t| exploration_summary(t).second_count)
        .collect();
    for t in &outcome.traces {
        let s = exploration_summary(t);
        println!("seed {:4}  sorted counts {:?}", t.seed, s.sorted_counts);
    }
    seconds.sort_unstable();
    println!("second-most-sampled counts (ascending): {seconds:?}");
    println!("10th percentile: {}", seconds[seconds.len() / 10]);
    println!("minimum: {}", seconds[0]);
    Ok(())
}
