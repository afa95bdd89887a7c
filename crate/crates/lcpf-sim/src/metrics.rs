//! Error metrics: per-step RMSE over targets, sensors, and runs; its time
//! average (ARMSE); the across-sensor error spread; and track-loss
//! bookkeeping.

use serde::{Deserialize, Serialize};

/// A run whose final-step position error exceeds this threshold (half the
/// average inter-sensor distance of the reference deployment) counts as a
/// lost track.
pub const TRACK_LOSS_THRESHOLD_M: f64 = 5.0;

/// Squared-error aggregates of a single Monte Carlo run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStats {
    /// Per time step: `Σ_{sensors, targets} ‖ρ̂ − ρ‖²`.
    pub per_step_sq: Vec<f64>,
    /// Per sensor: `Σ_{targets, steps} ‖ρ̂ − ρ‖²`.
    pub per_sensor_sq: Vec<f64>,
    /// Mean over sensors and targets of the position error norm at the
    /// final step; decides track loss.
    pub final_error: f64,
    /// Steps on which at least one local filter flagged divergence.
    pub diverged_steps: usize,
    /// Real numbers broadcast per time step (constant within a run).
    pub transmissions_per_step: u64,
    /// Real numbers broadcast over the whole run.
    pub transmissions_total: u64,
}

/// Per-step position RMSE across runs: `sqrt(mean ‖ρ̂ − ρ‖²)` with the mean
/// over targets, sensor estimates, and the selected runs.
pub fn rmse_n(runs: &[RunStats], selected: &[usize], samples_per_step: usize) -> Vec<f64> {
    if runs.is_empty() || selected.is_empty() {
        return Vec::new();
    }
    let n_steps = runs[0].per_step_sq.len();
    let denom = (selected.len() * samples_per_step) as f64;
    (0..n_steps)
        .map(|n| {
            let sum: f64 = selected.iter().map(|&r| runs[r].per_step_sq[n]).sum();
            (sum / denom).sqrt()
        })
        .collect()
}

/// Time-averaged RMSE: `sqrt(mean_n RMSE_n²)`.
pub fn armse(rmse_series: &[f64]) -> f64 {
    if rmse_series.is_empty() {
        return 0.0;
    }
    let sum: f64 = rmse_series.iter().map(|r| r * r).sum();
    (sum / rmse_series.len() as f64).sqrt()
}

/// Population standard deviation over sensors of the per-sensor error
/// `e_k = sqrt(mean_{targets, steps, runs} ‖ρ̂_k − ρ‖²)`. Undefined for a
/// single (fusion-center) estimate.
pub fn sigma_armse(
    runs: &[RunStats],
    selected: &[usize],
    samples_per_sensor: usize,
) -> Option<f64> {
    if runs.is_empty() || selected.is_empty() {
        return None;
    }
    let k = runs[0].per_sensor_sq.len();
    if k < 2 {
        return None;
    }
    let denom = (selected.len() * samples_per_sensor) as f64;
    let errors: Vec<f64> = (0..k)
        .map(|sensor| {
            let sum: f64 = selected.iter().map(|&r| runs[r].per_sensor_sq[sensor]).sum();
            (sum / denom).sqrt()
        })
        .collect();
    let mean = errors.iter().sum::<f64>() / k as f64;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / k as f64;
    Some(var.sqrt())
}

/// Indices of lost runs (final error above `threshold`) and the loss
/// percentage.
pub fn track_loss(runs: &[RunStats], threshold: f64) -> (f64, Vec<usize>) {
    let lost: Vec<usize> = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.final_error > threshold)
        .map(|(i, _)| i)
        .collect();
    let pct = if runs.is_empty() {
        0.0
    } else {
        100.0 * lost.len() as f64 / runs.len() as f64
    };
    (pct, lost)
}

/// Summary of one experiment (one method, many runs).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub method: String,
    pub runs: usize,
    pub num_sensor_estimates: usize,
    pub num_targets: usize,
    pub track_loss_threshold_m: f64,
    /// Per-step RMSE over all runs, meters.
    pub rmse_n: Vec<f64>,
    /// Per-step RMSE excluding lost-track runs.
    pub adjusted_rmse_n: Vec<f64>,
    pub armse_m: f64,
    pub adjusted_armse_m: f64,
    /// Across-sensor error spread; absent for centralized methods.
    pub sigma_armse_m: Option<f64>,
    pub adjusted_sigma_armse_m: Option<f64>,
    pub track_loss_percent: f64,
    pub lost_runs: Vec<usize>,
    pub transmissions_per_step: u64,
    pub transmissions_total: u64,
    pub diverged_steps_total: usize,
}

impl MetricsReport {
    /// Aggregates per-run statistics. `samples_per_step` is the number of
    /// (sensor, target) error terms entering each step's mean;
    /// `samples_per_sensor` the (target, step) terms entering each sensor's.
    pub fn from_runs(
        method: &str,
        runs: &[RunStats],
        num_sensor_estimates: usize,
        num_targets: usize,
    ) -> Self {
        let n_steps = runs.first().map(|r| r.per_step_sq.len()).unwrap_or(0);
        let samples_per_step = num_sensor_estimates * num_targets;
        let samples_per_sensor = num_targets * n_steps;
        let all: Vec<usize> = (0..runs.len()).collect();
        let (track_loss_percent, lost_runs) = track_loss(runs, TRACK_LOSS_THRESHOLD_M);
        // Adjusted metrics exclude lost runs; with every run lost there is
        // nothing left to average, so they fall back to the full set.
        let kept: Vec<usize> = if lost_runs.len() == runs.len() {
            all.clone()
        } else {
            all.iter()
                .copied()
                .filter(|r| !lost_runs.contains(r))
                .collect()
        };
        let rmse = rmse_n(runs, &all, samples_per_step);
        let adjusted_rmse = rmse_n(runs, &kept, samples_per_step);
        let armse_m = armse(&rmse);
        let adjusted_armse_m = armse(&adjusted_rmse);
        let sigma = sigma_armse(runs, &all, samples_per_sensor);
        let adjusted_sigma = sigma_armse(runs, &kept, samples_per_sensor);
        Self {
            method: method.to_owned(),
            runs: runs.len(),
            num_sensor_estimates,
            num_targets,
            track_loss_threshold_m: TRACK_LOSS_THRESHOLD_M,
            rmse_n: rmse,
            adjusted_rmse_n: adjusted_rmse,
            armse_m,
            adjusted_armse_m,
            sigma_armse_m: sigma,
            adjusted_sigma_armse_m: adjusted_sigma,
            track_loss_percent,
            lost_runs,
            transmissions_per_step: runs.first().map(|r| r.transmissions_per_step).unwrap_or(0),
            transmissions_total: runs.iter().map(|r| r.transmissions_total).sum(),
            diverged_steps_total: runs.iter().map(|r| r.diverged_steps).sum(),
        }
    }
}
