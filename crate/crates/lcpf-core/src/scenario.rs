//! The acoustic-amplitude multi-target tracking scenario: constant-velocity
//! target dynamics, amplitude-sum sensor model, priors, and ground-truth
//! simulation.
//!
//! Each of `P` targets carries a four-dimensional state
//! `(x, y, ẋ, ẏ)`; the joint state stacks them, so positions live at rows
//! `4p` and `4p+1`. Sensors measure the summed sound amplitude
//! `Σ_p A_p/dist^κ` plus Gaussian noise; the measurement does not depend on
//! the velocities.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)]
use num_traits::Float as _;

use crate::filters::{GaussianBelief, LinearGaussianTransition};
use crate::likelihood::{GaussianMeasurementModel, LikelihoodError, MeasurementFn};
use crate::network::SensorNetwork;

/// Per-target constant-velocity dynamics; the joint transition is block
/// diagonal in the targets.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetDynamics {
    /// 4×4 per-target system matrix, row-major.
    pub g_block: [[f64; 4]; 4],
    /// 4×2 per-target noise gain, row-major.
    pub w_block: [[f64; 2]; 4],
    /// Driving-noise variance σ_u².
    pub driving_noise_var: f64,
    /// Number of targets `P`.
    pub num_targets: usize,
}

impl TargetDynamics {
    pub fn state_dim(&self) -> usize {
        4 * self.num_targets
    }

    /// Joint block-diagonal transition over all targets.
    pub fn transition(&self) -> LinearGaussianTransition {
        let p = self.num_targets;
        let mut g = DMatrix::zeros(4 * p, 4 * p);
        let mut w = DMatrix::zeros(4 * p, 2 * p);
        for t in 0..p {
            for r in 0..4 {
                for c in 0..4 {
                    g[(4 * t + r, 4 * t + c)] = self.g_block[r][c];
                }
                for c in 0..2 {
                    w[(4 * t + r, 2 * t + c)] = self.w_block[r][c];
                }
            }
        }
        LinearGaussianTransition::new(g, w, self.driving_noise_var)
    }
}

/// Acoustic amplitude sensing: each target contributes `A_p / dist^κ`.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcousticModel {
    /// Sound amplitude of each target.
    pub amplitudes: Vec<f64>,
    /// Path-loss exponent κ.
    pub path_loss_exponent: f64,
    /// Measurement-noise variance σ_v².
    pub noise_var: f64,
    /// Clamp on the target-sensor distance; the raw model is singular at
    /// zero distance.
    pub min_distance: f64,
}

impl AcousticModel {
    pub fn num_targets(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Summed amplitude at sensor position `xi` for the joint state `x`
/// (positions at rows `4p`, `4p+1`). Distances are clamped from below, so
/// the value stays finite and continuous everywhere.
pub fn h_acoustic(x: &[f64], xi: [f64; 2], model: &AcousticModel) -> f64 {
    let mut acc = 0.0;
    for (p, &amp) in model.amplitudes.iter().enumerate() {
        let dx = x[4 * p] - xi[0];
        let dy = x[4 * p + 1] - xi[1];
        let dist = (dx * dx + dy * dy).sqrt().max(model.min_distance);
        acc += amp / dist.powf(model.path_loss_exponent);
    }
    acc
}

/// The acoustic measurement function of one sensor, usable wherever a
/// [`MeasurementFn`] is expected.
#[derive(Debug, Clone)]
pub struct AcousticSensor {
    pub model: AcousticModel,
    pub position: [f64; 2],
}

impl MeasurementFn for AcousticSensor {
    fn output_dim(&self) -> usize {
        1
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = h_acoustic(x, self.position, &self.model);
    }
}

/// Builds the per-sensor Gaussian measurement models for a network.
pub fn acoustic_sensor_models(
    net: &SensorNetwork,
    model: &AcousticModel,
) -> Result<Vec<GaussianMeasurementModel<AcousticSensor>>, LikelihoodError> {
    net.positions()
        .iter()
        .map(|&position| {
            GaussianMeasurementModel::scalar(
                AcousticSensor {
                    model: model.clone(),
                    position,
                },
                model.noise_var,
            )
        })
        .collect()
}

/// Initial prior: per-target Gaussian with a shared covariance.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorSpec {
    /// One 4-vector `(x, y, ẋ, ẏ)` per target.
    pub target_means: Vec<[f64; 4]>,
    /// Shared 4×4 covariance diagonal (the scenario uses a diagonal C₀).
    pub cov_diag: [f64; 4],
}

impl PriorSpec {
    pub fn state_dim(&self) -> usize {
        4 * self.target_means.len()
    }

    /// Joint Gaussian over the stacked target states.
    pub fn belief(&self) -> GaussianBelief {
        let p = self.target_means.len();
        let mut mean = DVector::zeros(4 * p);
        let mut cov = DMatrix::zeros(4 * p, 4 * p);
        for t in 0..p {
            for r in 0..4 {
                mean[4 * t + r] = self.target_means[t][r];
                cov[(4 * t + r, 4 * t + r)] = self.cov_diag[r];
            }
        }
        GaussianBelief::new(mean, cov).expect("prior covariance is diagonal nonnegative")
    }
}

/// Full scenario configuration. Every parameter of the reference experiment
/// is overridable; [`ScenarioConfig::paper_defaults`] yields the published
/// setting.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ScenarioConfig {
    pub dynamics: TargetDynamics,
    pub acoustic: AcousticModel,
    pub prior: PriorSpec,
    /// Sensor count (a perfect square for the jittered grid).
    pub num_sensors: usize,
    /// Side length of the square deployment region, meters.
    pub area_side: f64,
    /// Communication range, meters.
    pub comm_range: f64,
    /// Grid jitter as a fraction of the cell side, in [0, 0.5).
    pub jitter_fraction: f64,
    /// Polynomial degree `R_p` of the measurement-function approximation.
    pub poly_degree: u32,
    /// Consensus iterations `I` per stage.
    pub consensus_iterations: usize,
    /// Particle count `J` (per sensor for the distributed filters, total
    /// for the centralized ones).
    pub num_particles: usize,
    /// Particles per sensor `J'` for the reduced-complexity filter.
    pub reduced_particles: usize,
    /// Simulated time steps per run.
    pub num_steps: usize,
}

impl ScenarioConfig {
    /// The published two-target, 25-sensor acoustic tracking setting.
    pub fn paper_defaults() -> Self {
        Self {
            dynamics: TargetDynamics {
                g_block: [
                    [1.0, 0.0, 1.0, 0.0],
                    [0.0, 1.0, 0.0, 1.0],
                    [0.0, 0.0, 1.0, 0.0],
                    [0.0, 0.0, 0.0, 1.0],
                ],
                w_block: [[0.5, 0.0], [0.0, 0.5], [1.0, 0.0], [0.0, 1.0]],
                driving_noise_var: 0.00035,
                num_targets: 2,
            },
            acoustic: AcousticModel {
                amplitudes: vec![10.0, 10.0],
                path_loss_exponent: 1.0,
                noise_var: 0.05,
                min_distance: 0.1,
            },
            prior: PriorSpec {
                target_means: vec![[36.0, 36.0, -0.05, -0.05], [4.0, 4.0, 0.05, 0.05]],
                cov_diag: [1.0, 1.0, 0.001, 0.001],
            },
            num_sensors: 25,
            area_side: 40.0,
            comm_range: 18.0,
            jitter_fraction: 0.25,
            poly_degree: 2,
            consensus_iterations: 8,
            num_particles: 5000,
            reduced_particles: 200,
            num_steps: 200,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    /// Rows of the joint state holding positions; these are the basis
    /// variables of the likelihood consensus (measurements do not depend on
    /// the velocities).
    pub fn position_projection(&self) -> Vec<usize> {
        let mut idx = Vec::with_capacity(2 * self.dynamics.num_targets);
        for t in 0..self.dynamics.num_targets {
            idx.push(4 * t);
            idx.push(4 * t + 1);
        }
        idx
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

/// Ground-truth state sequence `x_0 … x_N`.
#[derive(Debug, Clone)]
pub struct Truth {
    /// `states[n]` is the joint state at time `n`; index 0 is the initial
    /// state.
    pub states: Vec<DVector<f64>>,
}

impl Truth {
    /// Position of target `p` at time `n`.
    pub fn position(&self, n: usize, p: usize) -> [f64; 2] {
        [self.states[n][4 * p], self.states[n][4 * p + 1]]
    }
}

/// Simulates the state recursion from a random initial state drawn from the
/// prior.
pub fn simulate_truth<R: Rng + ?Sized>(
    dynamics: &TargetDynamics,
    prior: &PriorSpec,
    num_steps: usize,
    rng: &mut R,
) -> Truth {
    let x0 = prior.belief().sample(1, rng).states().column(0).into_owned();
    simulate_truth_from(dynamics, x0, num_steps, rng)
}

/// Simulates the state recursion from a fixed initial state (regression
/// mode).
pub fn simulate_truth_from<R: Rng + ?Sized>(
    dynamics: &TargetDynamics,
    x0: DVector<f64>,
    num_steps: usize,
    rng: &mut R,
) -> Truth {
    let trans = dynamics.transition();
    let mut states = Vec::with_capacity(num_steps + 1);
    states.push(x0);
    for n in 0..num_steps {
        let next = trans.sample_one(&states[n], rng);
        states.push(next);
    }
    Truth { states }
}

/// All sensors' measurements of the state `x`: `z_k = h_k(x) + v_k` with
/// independent `v_k ~ N(0, σ_v²)`.
pub fn measure_all<R: Rng + ?Sized>(
    x: &DVector<f64>,
    net: &SensorNetwork,
    model: &AcousticModel,
    rng: &mut R,
) -> DVector<f64> {
    let sigma = model.noise_var.sqrt();
    DVector::from_fn(net.num_sensors(), |k, _| {
        h_acoustic(x.as_slice(), net.position(k), model)
            + sigma * rng.sample::<f64, _>(StandardNormal)
    })
}

/// Exact centralized log-JLF of the acoustic scenario, up to an
/// x-independent constant: `−Σ_k (z_k − h_k(x))²/(2σ_v²)`.
pub fn exact_log_jlf<'a>(
    net: &'a SensorNetwork,
    model: &'a AcousticModel,
    measurements: &'a DVector<f64>,
) -> impl Fn(&[f64]) -> f64 + 'a {
    move |x: &[f64]| {
        let mut acc = 0.0;
        for k in 0..net.num_sensors() {
            let diff = measurements[k] - h_acoustic(x, net.position(k), model);
            acc -= diff * diff;
        }
        acc / (2.0 * model.noise_var)
    }
}
