//! Monte Carlo harness for the likelihood-consensus distributed particle
//! filters: experiment configuration, the run loop, error metrics,
//! communication accounting, and file outputs.

pub mod comm;
pub mod metrics;
pub mod report;
pub mod runner;

pub use comm::comm_cost;
pub use metrics::{armse, rmse_n, sigma_armse, track_loss, MetricsReport, TRACK_LOSS_THRESHOLD_M};
pub use runner::{run_experiment, ExperimentConfig, ExperimentOutcome, Method};
