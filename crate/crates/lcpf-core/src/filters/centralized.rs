//! Centralized baselines: the sequential importance resampling filter and
//! the Gaussian particle filter, both evaluating an exact log-JLF supplied
//! by the caller (measurements of all sensors are available at one place).

use nalgebra::DVector;
use rand::Rng;

use super::{
    point_estimate, propagate, systematic_resample, weight_update, FilterError, GaussianBelief,
    LinearGaussianTransition, ParticleSet,
};

/// Estimate produced by one filter step, with a divergence flag: when every
/// particle's likelihood underflows, the weights are reset to uniform and
/// the step is marked diverged instead of aborting the run.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub estimate: DVector<f64>,
    pub diverged: bool,
}

/// One recursion of the centralized particle filter: resample, propagate,
/// reweight by the exact log-JLF, and return the weighted-mean estimate.
pub fn cpf_step<R: Rng + ?Sized>(
    particles: &mut ParticleSet,
    trans: &LinearGaussianTransition,
    log_jlf: impl FnMut(&[f64]) -> f64,
    rng: &mut R,
) -> Result<StepOutput, FilterError> {
    *particles = systematic_resample(particles, rng)?;
    propagate(particles, trans, rng);
    let diverged = apply_weights(particles, log_jlf)?;
    Ok(StepOutput {
        estimate: point_estimate(particles),
        diverged,
    })
}

/// One recursion of the centralized Gaussian particle filter: sample from
/// the previous Gaussian posterior (this replaces resampling), propagate,
/// reweight, then collapse to a new mean and covariance.
pub fn cgpf_step<R: Rng + ?Sized>(
    belief: &mut GaussianBelief,
    num_particles: usize,
    trans: &LinearGaussianTransition,
    log_jlf: impl FnMut(&[f64]) -> f64,
    rng: &mut R,
) -> Result<StepOutput, FilterError> {
    let mut particles = belief.sample(num_particles, rng);
    propagate(&mut particles, trans, rng);
    let diverged = apply_weights(&mut particles, log_jlf)?;
    *belief = GaussianBelief::from_weighted_particles(&particles)?;
    Ok(StepOutput {
        estimate: belief.mean().clone(),
        diverged,
    })
}

/// Weight update with the divergence fallback shared by all filters.
pub(super) fn apply_weights(
    particles: &mut ParticleSet,
    log_jlf: impl FnMut(&[f64]) -> f64,
) -> Result<bool, FilterError> {
    match weight_update(particles, log_jlf) {
        Ok(()) => Ok(false),
        Err(FilterError::Divergence) => {
            particles.reset_uniform_weights();
            Ok(true)
        }
        Err(e) => Err(e),
    }
}
