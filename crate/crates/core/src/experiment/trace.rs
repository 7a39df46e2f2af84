use serde::Serialize;

use crate::diagnostics::DiagnosticsSnapshot;

/// `ln` of the smallest positive double, rounded down; stored when the
/// sub-optimality underflows to zero.
pub const LOG_SUBOPT_FLOOR: f64 = -745.0;

/// Natural log of a sub-optimality value, floored, with an underflow flag.
pub fn log_suboptimality(subopt: f64) -> (f64, bool) {
    if subopt > 0.0 {
        (subopt.ln().max(LOG_SUBOPT_FLOOR), false)
    } else {
        (LOG_SUBOPT_FLOOR, true)
    }
}

/// State after `t` updates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckpointRow {
    pub t: u64,
    pub subopt: f64,
    pub pi_star: f64,
    pub counts: Vec<u64>,
    pub theta: Vec<f64>,
    /// Sum of `subopt` over every state after 1..=t updates.
    pub cum_subopt: f64,
    pub diagnostics: Option<DiagnosticsSnapshot>,
}

impl CheckpointRow {
    pub fn log_subopt(&self) -> (f64, bool) {
        log_suboptimality(self.subopt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminalSummary {
    pub t: u64,
    pub subopt: f64,
    pub pi_star: f64,
    pub counts: Vec<u64>,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTrace {
    pub seed: u64,
    pub eta: f64,
    pub k: usize,
    pub optimal_arm: usize,
    pub r_max: f64,
    pub horizon: u64,
    pub rows: Vec<CheckpointRow>,
    pub terminal: TerminalSummary,
}

impl RunTrace {
    pub fn key(&self) -> RunKey {
        RunKey {
            eta: self.eta,
            seed: self.seed,
        }
    }
}

/// Identity of a run inside a sweep; orders by `(eta, seed)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunKey {
    pub eta: f64,
    pub seed: u64,
}

impl Eq for RunKey {}

impl PartialOrd for RunKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RunKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.eta
            .total_cmp(&other.eta)
            .then(self.seed.cmp(&other.seed))
    }
}
