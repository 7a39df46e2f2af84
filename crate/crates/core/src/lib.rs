//! Simulator and diagnostics for the stochastic gradient bandit algorithm
//! with softmax parameterization and a constant learning rate.
//!
//! The crate is organized bottom-up:
//!
//! - [`policy`]: logits, softmax, Jacobian, action sampling
//! - [`env`]: bandit environments and sub-optimality
//! - [`algorithm`]: the update rule, its gradient-ascent form, and exact expectations
//! - [`diagnostics`]: progress/noise decomposition and concentration envelopes
//! - [`rate_bounds`]: the difference-equation bounds behind the convergence rate
//! - [`experiment`]: configs, seeded runs, sweeps, and output formats
//! - [`verify`]: self-contained property suites

pub mod algorithm;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod experiment;
pub mod policy;
pub mod rate_bounds;
pub mod rng;
pub mod verify;

pub use algorithm::{
    exact_gradient, expected_update, is_estimate, step_direct, step_sga, IsEstimate, UpdateInputs,
};
pub use diagnostics::{
    envelope_violation_test, exploration_summary, freedman_envelope, DiagnosticsState,
    ExplorationSummary, ViolationReport,
};
pub use env::{BanditEnv, RewardKind, RewardSample};
pub use error::{Error, Result};
pub use experiment::{
    paper_default_config, run_single, run_sweep, two_action_config, DiagLevel, ExperimentConfig,
    RunTrace,
};
pub use policy::{sample_action, softmax, softmax_jacobian, Parameters, PolicyDist};
pub use rng::RandomStream;
