//! The Monte Carlo experiment runner.
//!
//! A single experiment fixes a topology (drawn from the master seed), then
//! executes `runs` independent simulations of truth + measurements + filter.
//! Every random stream is derived from `(master seed, purpose, run, sensor,
//! step)`, so experiments are reproducible bit-for-bit and Monte Carlo runs
//! parallelize without coordination; results are aggregated in run order.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lcpf_core::filters::lc::{LcConfig, LcContext};
use lcpf_core::filters::{
    cgpf_step, cpf_step, lcdgpf_step, lcdpf_step, rlcdgpf_step, FilterError,
    LinearGaussianTransition, ParticleSet,
};
use lcpf_core::likelihood::GaussianMeasurementModel;
use lcpf_core::network::{
    build_jittered_grid, metropolis_weights, ConsensusWeights, NetworkError, SensorNetwork,
    TransmissionLedger, DEFAULT_CONNECTIVITY_RETRIES,
};
use lcpf_core::rng::derive_rng;
use lcpf_core::scenario::{
    acoustic_sensor_models, exact_log_jlf, measure_all, simulate_truth, AcousticSensor,
    ScenarioConfig, Truth,
};

use crate::comm::comm_cost;
use crate::metrics::{MetricsReport, RunStats};

mod seed_tags {
    pub const TOPOLOGY: u64 = 0xA1;
    pub const TRUTH: u64 = 0xA2;
    pub const MEASUREMENT: u64 = 0xA3;
    pub const INIT: u64 = 0xA4;
    pub const STEP: u64 = 0xA5;
    /// Pseudo-sensor index for the fusion center's streams.
    pub const FUSION_CENTER: u64 = u64::MAX;
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// The five filters the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Cpf,
    Cgpf,
    LcDpf,
    LcDgpf,
    RLcDgpf,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Cpf,
        Method::Cgpf,
        Method::LcDpf,
        Method::LcDgpf,
        Method::RLcDgpf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Cpf => "CPF",
            Method::Cgpf => "CGPF",
            Method::LcDpf => "LC-DPF",
            Method::LcDgpf => "LC-DGPF",
            Method::RLcDgpf => "R-LC-DGPF",
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Method::Cpf => "cpf",
            Method::Cgpf => "cgpf",
            Method::LcDpf => "lc-dpf",
            Method::LcDgpf => "lc-dgpf",
            Method::RLcDgpf => "r-lc-dgpf",
        }
    }

    pub fn is_distributed(self) -> bool {
        matches!(self, Method::LcDpf | Method::LcDgpf | Method::RLcDgpf)
    }
}

impl core::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.cli_name() == norm || m.label().to_ascii_lowercase() == norm)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

/// One experiment: a method, a scenario, a run count, and the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub method: Method,
    pub runs: usize,
    pub master_seed: u64,
    /// Replace every consensus stage by exact summation (oracle mode).
    pub exact_sums: bool,
}

impl ExperimentConfig {
    pub fn new(method: Method, runs: usize, master_seed: u64) -> Self {
        Self {
            scenario: ScenarioConfig::paper_defaults(),
            method,
            runs,
            master_seed,
            exact_sums: false,
        }
    }
}

/// Everything an experiment produces besides the files on disk.
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub network: SensorNetwork,
    pub run_stats: Vec<RunStats>,
}

fn lc_context(cfg: &ExperimentConfig) -> Result<LcContext, HarnessError> {
    let sc = &cfg.scenario;
    let mut lc = LcConfig::new(
        sc.poly_degree,
        sc.position_projection(),
        sc.consensus_iterations,
    );
    lc.exact_sums = cfg.exact_sums;
    Ok(LcContext::new(lc)?)
}

fn validate(cfg: &ExperimentConfig, ctx: &LcContext) -> Result<(), HarnessError> {
    let sc = &cfg.scenario;
    if cfg.runs == 0 {
        return Err(HarnessError::InvalidConfig("runs must be positive".into()));
    }
    if sc.num_steps == 0 {
        return Err(HarnessError::InvalidConfig(
            "num_steps must be positive".into(),
        ));
    }
    match cfg.method {
        Method::LcDpf | Method::LcDgpf => {
            if sc.num_particles < ctx.min_fit_points() {
                return Err(HarnessError::InvalidConfig(format!(
                    "J = {} is below the {} fitting points the basis needs",
                    sc.num_particles,
                    ctx.min_fit_points()
                )));
            }
        }
        Method::RLcDgpf => {
            if sc.reduced_particles * sc.num_sensors != sc.num_particles {
                return Err(HarnessError::InvalidConfig(format!(
                    "J' = J/K must be an integer: J = {}, K = {}, J' = {}",
                    sc.num_particles, sc.num_sensors, sc.reduced_particles
                )));
            }
            if sc.reduced_particles < ctx.min_fit_points() {
                return Err(HarnessError::InvalidConfig(format!(
                    "J' = {} is below the {} fitting points the basis needs",
                    sc.reduced_particles,
                    ctx.min_fit_points()
                )));
            }
        }
        Method::Cpf | Method::Cgpf => {}
    }
    Ok(())
}

/// Runs the configured experiment and aggregates the metrics. Deterministic
/// in `(config, master_seed)` regardless of thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    let ctx = lc_context(cfg)?;
    validate(cfg, &ctx)?;
    let sc = &cfg.scenario;
    let mut topo_rng = derive_rng(cfg.master_seed, &[seed_tags::TOPOLOGY]);
    let network = build_jittered_grid(
        sc.num_sensors,
        sc.area_side,
        sc.comm_range,
        sc.jitter_fraction,
        DEFAULT_CONNECTIVITY_RETRIES,
        &mut topo_rng,
    )?;
    let weights = metropolis_weights(&network);
    let models = acoustic_sensor_models(&network, &sc.acoustic)
        .map_err(FilterError::Likelihood)?;
    let trans = sc.dynamics.transition();

    let run_stats: Vec<RunStats> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| simulate_run(cfg, &ctx, &network, &weights, &models, &trans, run))
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let sensor_estimates = if cfg.method.is_distributed() {
        sc.num_sensors
    } else {
        1
    };
    let report = MetricsReport::from_runs(
        cfg.method.label(),
        &run_stats,
        sensor_estimates,
        sc.dynamics.num_targets,
    );
    Ok(ExperimentOutcome {
        report,
        network,
        run_stats,
    })
}

/// Accumulates position errors of one run.
struct Recorder {
    per_step_sq: Vec<f64>,
    per_sensor_sq: Vec<f64>,
    final_norm_sum: f64,
    num_steps: usize,
    num_targets: usize,
}

impl Recorder {
    fn new(num_steps: usize, sensors: usize, num_targets: usize) -> Self {
        Self {
            per_step_sq: vec![0.0; num_steps],
            per_sensor_sq: vec![0.0; sensors],
            final_norm_sum: 0.0,
            num_steps,
            num_targets,
        }
    }

    fn record(&mut self, step: usize, sensor: usize, estimate: &DVector<f64>, truth: &Truth) {
        for p in 0..self.num_targets {
            let [tx, ty] = truth.position(step, p);
            let dx = estimate[4 * p] - tx;
            let dy = estimate[4 * p + 1] - ty;
            let sq = dx * dx + dy * dy;
            self.per_step_sq[step - 1] += sq;
            self.per_sensor_sq[sensor] += sq;
            if step == self.num_steps {
                self.final_norm_sum += sq.sqrt();
            }
        }
    }

    fn finish(self, diverged_steps: usize, tx_per_step: u64, tx_total: u64) -> RunStats {
        let sensors = self.per_sensor_sq.len();
        RunStats {
            per_step_sq: self.per_step_sq,
            per_sensor_sq: self.per_sensor_sq,
            final_error: self.final_norm_sum / (sensors * self.num_targets) as f64,
            diverged_steps,
            transmissions_per_step: tx_per_step,
            transmissions_total: tx_total,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_run(
    cfg: &ExperimentConfig,
    ctx: &LcContext,
    network: &SensorNetwork,
    weights: &ConsensusWeights,
    models: &[GaussianMeasurementModel<AcousticSensor>],
    trans: &LinearGaussianTransition,
    run: usize,
) -> Result<RunStats, HarnessError> {
    let sc = &cfg.scenario;
    let seed = cfg.master_seed;
    let run_tag = run as u64;
    let n_steps = sc.num_steps;
    let k = sc.num_sensors;

    let mut truth_rng = derive_rng(seed, &[seed_tags::TRUTH, run_tag]);
    let truth = simulate_truth(&sc.dynamics, &sc.prior, n_steps, &mut truth_rng);
    let mut meas_rng = derive_rng(seed, &[seed_tags::MEASUREMENT, run_tag]);
    let measurements: Vec<DVector<f64>> = (1..=n_steps)
        .map(|n| measure_all(&truth.states[n], network, &sc.acoustic, &mut meas_rng))
        .collect();

    let prior = sc.prior.belief();
    let centralized_cost = comm_cost(cfg.method, network, sc);

    match cfg.method {
        Method::Cpf => {
            let mut recorder = Recorder::new(n_steps, 1, sc.dynamics.num_targets);
            let mut diverged = 0usize;
            let mut init_rng =
                derive_rng(seed, &[seed_tags::INIT, run_tag, seed_tags::FUSION_CENTER]);
            let mut particles = prior.sample(sc.num_particles, &mut init_rng);
            for n in 1..=n_steps {
                let mut rng = derive_rng(
                    seed,
                    &[seed_tags::STEP, run_tag, seed_tags::FUSION_CENTER, n as u64],
                );
                let jlf = exact_log_jlf(network, &sc.acoustic, &measurements[n - 1]);
                let out = cpf_step(&mut particles, trans, &jlf, &mut rng)?;
                diverged += out.diverged as usize;
                recorder.record(n, 0, &out.estimate, &truth);
            }
            Ok(recorder.finish(
                diverged,
                centralized_cost,
                centralized_cost * n_steps as u64,
            ))
        }
        Method::Cgpf => {
            let mut recorder = Recorder::new(n_steps, 1, sc.dynamics.num_targets);
            let mut diverged = 0usize;
            let mut belief = prior;
            for n in 1..=n_steps {
                let mut rng = derive_rng(
                    seed,
                    &[seed_tags::STEP, run_tag, seed_tags::FUSION_CENTER, n as u64],
                );
                let jlf = exact_log_jlf(network, &sc.acoustic, &measurements[n - 1]);
                let out = cgpf_step(&mut belief, sc.num_particles, trans, &jlf, &mut rng)?;
                diverged += out.diverged as usize;
                recorder.record(n, 0, &out.estimate, &truth);
            }
            Ok(recorder.finish(
                diverged,
                centralized_cost,
                centralized_cost * n_steps as u64,
            ))
        }
        Method::LcDpf => {
            let mut recorder = Recorder::new(n_steps, k, sc.dynamics.num_targets);
            let mut diverged = 0usize;
            let mut ledger = TransmissionLedger::new();
            let mut sets: Vec<ParticleSet> = (0..k)
                .map(|sensor| {
                    let mut rng = derive_rng(seed, &[seed_tags::INIT, run_tag, sensor as u64]);
                    prior.sample(sc.num_particles, &mut rng)
                })
                .collect();
            let mut tx_per_step = 0u64;
            for n in 1..=n_steps {
                let mut rngs = step_rngs(seed, run_tag, k, n);
                let z = per_sensor_measurements(&measurements[n - 1]);
                let out = lcdpf_step(
                    &mut sets, trans, ctx, network, weights, &mut ledger, models, &z, &mut rngs,
                )?;
                for sensor in 0..k {
                    recorder.record(n, sensor, &out.estimates[sensor], &truth);
                }
                diverged += out.diverged.iter().filter(|d| **d).count();
                tx_per_step = ledger.finish_step();
            }
            Ok(recorder.finish(diverged, tx_per_step, ledger.cumulative_total()))
        }
        Method::LcDgpf => {
            let mut recorder = Recorder::new(n_steps, k, sc.dynamics.num_targets);
            let mut diverged = 0usize;
            let mut ledger = TransmissionLedger::new();
            let mut beliefs = vec![prior; k];
            let mut tx_per_step = 0u64;
            for n in 1..=n_steps {
                let mut rngs = step_rngs(seed, run_tag, k, n);
                let z = per_sensor_measurements(&measurements[n - 1]);
                let out = lcdgpf_step(
                    &mut beliefs,
                    sc.num_particles,
                    trans,
                    ctx,
                    network,
                    weights,
                    &mut ledger,
                    models,
                    &z,
                    &mut rngs,
                )?;
                for sensor in 0..k {
                    recorder.record(n, sensor, &out.estimates[sensor], &truth);
                }
                diverged += out.diverged.iter().filter(|d| **d).count();
                tx_per_step = ledger.finish_step();
            }
            Ok(recorder.finish(diverged, tx_per_step, ledger.cumulative_total()))
        }
        Method::RLcDgpf => {
            let mut recorder = Recorder::new(n_steps, k, sc.dynamics.num_targets);
            let mut diverged = 0usize;
            let mut ledger = TransmissionLedger::new();
            let mut beliefs = vec![prior; k];
            let mut tx_per_step = 0u64;
            for n in 1..=n_steps {
                let mut rngs = step_rngs(seed, run_tag, k, n);
                let z = per_sensor_measurements(&measurements[n - 1]);
                let out = rlcdgpf_step(
                    &mut beliefs,
                    sc.reduced_particles,
                    trans,
                    ctx,
                    network,
                    weights,
                    &mut ledger,
                    models,
                    &z,
                    &mut rngs,
                )?;
                for sensor in 0..k {
                    recorder.record(n, sensor, &out.estimates[sensor], &truth);
                }
                diverged += out.diverged.iter().filter(|d| **d).count();
                tx_per_step = ledger.finish_step();
            }
            Ok(recorder.finish(diverged, tx_per_step, ledger.cumulative_total()))
        }
    }
}

fn step_rngs(seed: u64, run: u64, k: usize, n: usize) -> Vec<lcpf_core::rng::ChaCha12Rng> {
    (0..k)
        .map(|sensor| derive_rng(seed, &[seed_tags::STEP, run, sensor as u64, n as u64]))
        .collect()
}

fn per_sensor_measurements(z: &DVector<f64>) -> Vec<DVector<f64>> {
    z.iter().map(|&v| DVector::from_element(1, v)).collect()
}
