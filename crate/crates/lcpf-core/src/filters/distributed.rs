//! The three consensus-based distributed filters. Every sensor runs its own
//! local filter; the only inter-sensor coupling is through consensus stages
//! (the JLF coefficients, plus the posterior moments for the
//! reduced-complexity Gaussian variant). Sensors use independent random
//! streams, so estimates differ across sensors only through sampling noise
//! and unconverged consensus.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float as _;

use crate::likelihood::{GaussianMeasurementModel, MeasurementFn};
use crate::network::{consensus_sum, ConsensusStage, ConsensusWeights, SensorNetwork, TransmissionLedger};

use super::lc::LcContext;
use super::{
    point_estimate, propagate, systematic_resample, weighted_moments, FilterError, GaussianBelief,
    LinearGaussianTransition, ParticleSet,
};

/// Largest exponent handed to `exp` when forming nonnormalized weights;
/// keeps the partial sums finite.
const MAX_LOG_WEIGHT: f64 = 600.0;

/// Per-sensor estimates from one distributed filter step.
#[derive(Debug, Clone)]
pub struct DistributedStepOutput {
    pub estimates: Vec<DVector<f64>>,
    pub diverged: Vec<bool>,
}

fn check_sensor_count(k: usize, len: usize) -> Result<(), FilterError> {
    if len != k {
        return Err(FilterError::DimensionMismatch {
            expected: k,
            got: len,
        });
    }
    Ok(())
}

/// One step of the LC-based distributed particle filter. Each sensor
/// resamples and propagates its own particles, the network runs likelihood
/// consensus, and each sensor reweights its particles with its own estimate
/// of the approximate JLF.
#[allow(clippy::too_many_arguments)]
pub fn lcdpf_step<H: MeasurementFn, R: Rng>(
    particle_sets: &mut [ParticleSet],
    trans: &LinearGaussianTransition,
    ctx: &LcContext,
    net: &SensorNetwork,
    weights: &ConsensusWeights,
    ledger: &mut TransmissionLedger,
    models: &[GaussianMeasurementModel<H>],
    measurements: &[DVector<f64>],
    rngs: &mut [R],
) -> Result<DistributedStepOutput, FilterError> {
    let k = net.num_sensors();
    check_sensor_count(k, particle_sets.len())?;
    check_sensor_count(k, models.len())?;
    check_sensor_count(k, measurements.len())?;
    check_sensor_count(k, rngs.len())?;

    for sensor in 0..k {
        let resampled = systematic_resample(&particle_sets[sensor], &mut rngs[sensor])?;
        particle_sets[sensor] = resampled;
        propagate(&mut particle_sets[sensor], trans, &mut rngs[sensor]);
    }
    let stats = ctx.run_stage(net, weights, ledger, models, particle_sets, measurements)?;

    let mut estimates = Vec::with_capacity(k);
    let mut diverged = Vec::with_capacity(k);
    for sensor in 0..k {
        let projected = ctx.project(&particle_sets[sensor]);
        let logs = stats[sensor].eval_log_batch(projected.as_view())?;
        let flag = match super::weight_update_from_logs(&mut particle_sets[sensor], &logs) {
            Ok(()) => false,
            Err(FilterError::Divergence) => {
                particle_sets[sensor].reset_uniform_weights();
                true
            }
            Err(e) => return Err(e),
        };
        estimates.push(point_estimate(&particle_sets[sensor]));
        diverged.push(flag);
    }
    Ok(DistributedStepOutput {
        estimates,
        diverged,
    })
}

/// One step of the LC-based distributed Gaussian particle filter: sampling
/// from the previous local Gaussian replaces resampling; after the weight
/// update each sensor collapses its particles to a new mean and covariance.
#[allow(clippy::too_many_arguments)]
pub fn lcdgpf_step<H: MeasurementFn, R: Rng>(
    beliefs: &mut [GaussianBelief],
    num_particles: usize,
    trans: &LinearGaussianTransition,
    ctx: &LcContext,
    net: &SensorNetwork,
    weights: &ConsensusWeights,
    ledger: &mut TransmissionLedger,
    models: &[GaussianMeasurementModel<H>],
    measurements: &[DVector<f64>],
    rngs: &mut [R],
) -> Result<DistributedStepOutput, FilterError> {
    let k = net.num_sensors();
    check_sensor_count(k, beliefs.len())?;
    check_sensor_count(k, models.len())?;
    check_sensor_count(k, measurements.len())?;
    check_sensor_count(k, rngs.len())?;

    let mut particle_sets: Vec<ParticleSet> = Vec::with_capacity(k);
    for sensor in 0..k {
        let mut ps = beliefs[sensor].sample(num_particles, &mut rngs[sensor]);
        propagate(&mut ps, trans, &mut rngs[sensor]);
        particle_sets.push(ps);
    }
    let stats = ctx.run_stage(net, weights, ledger, models, &particle_sets, measurements)?;

    let mut estimates = Vec::with_capacity(k);
    let mut diverged = Vec::with_capacity(k);
    for sensor in 0..k {
        let projected = ctx.project(&particle_sets[sensor]);
        let logs = stats[sensor].eval_log_batch(projected.as_view())?;
        let flag = match super::weight_update_from_logs(&mut particle_sets[sensor], &logs) {
            Ok(()) => false,
            Err(FilterError::Divergence) => {
                particle_sets[sensor].reset_uniform_weights();
                true
            }
            Err(e) => return Err(e),
        };
        beliefs[sensor] = GaussianBelief::from_weighted_particles(&particle_sets[sensor])?;
        estimates.push(beliefs[sensor].mean().clone());
        diverged.push(flag);
    }
    Ok(DistributedStepOutput {
        estimates,
        diverged,
    })
}

/// One step of the reduced-complexity distributed Gaussian particle filter.
///
/// Each sensor runs only `J' = J/K` particles with nonnormalized weights;
/// a second consensus stage sums the partial means, correlations, and
/// weight sums, after which every sensor normalizes locally. The weights
/// are formed as `exp(log f̃ − s)` with a reference shift `s` evaluated at
/// the sensor's predicted mean; the shift is common across sensors up to
/// consensus error and cancels after normalization, while keeping `exp`
/// within range.
#[allow(clippy::too_many_arguments)]
pub fn rlcdgpf_step<H: MeasurementFn, R: Rng>(
    beliefs: &mut [GaussianBelief],
    particles_per_sensor: usize,
    trans: &LinearGaussianTransition,
    ctx: &LcContext,
    net: &SensorNetwork,
    weights: &ConsensusWeights,
    ledger: &mut TransmissionLedger,
    models: &[GaussianMeasurementModel<H>],
    measurements: &[DVector<f64>],
    rngs: &mut [R],
) -> Result<DistributedStepOutput, FilterError> {
    let k = net.num_sensors();
    check_sensor_count(k, beliefs.len())?;
    check_sensor_count(k, models.len())?;
    check_sensor_count(k, measurements.len())?;
    check_sensor_count(k, rngs.len())?;
    if particles_per_sensor < ctx.min_fit_points() {
        return Err(FilterError::TooFewParticles {
            context: "reduced-complexity local filter",
            needed: ctx.min_fit_points(),
            got: particles_per_sensor,
        });
    }
    let m = trans.state_dim();

    // Steps 1-2: J' samples from each sensor's previous Gaussian, propagated.
    let predicted_means: Vec<DVector<f64>> = beliefs
        .iter()
        .map(|b| trans.predict_mean(b.mean()))
        .collect();
    let mut particle_sets: Vec<ParticleSet> = Vec::with_capacity(k);
    for sensor in 0..k {
        let mut ps = beliefs[sensor].sample(particles_per_sensor, &mut rngs[sensor]);
        propagate(&mut ps, trans, &mut rngs[sensor]);
        particle_sets.push(ps);
    }

    // Step 3: likelihood consensus on the local fits.
    let stats = ctx.run_stage(net, weights, ledger, models, &particle_sets, measurements)?;

    // Steps 4-5: nonnormalized weights and partial moments, locally.
    let mut diverged = vec![false; k];
    let n_pairs = m * (m + 1) / 2;
    let n_moments = m + n_pairs + 1;
    let mut payload = DMatrix::zeros(k, n_moments);
    for sensor in 0..k {
        let projected = ctx.project(&particle_sets[sensor]);
        let logs = stats[sensor].eval_log_batch(projected.as_view())?;
        let max_log = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let proj_dim = ctx.config().projection.len();
        let mut ref_point = vec![0.0; proj_dim];
        for (i, &src) in ctx.config().projection.iter().enumerate() {
            ref_point[i] = predicted_means[sensor][src];
        }
        let mut shift = stats[sensor].eval_log(&ref_point)?;
        if !shift.is_finite() {
            shift = 0.0;
        }
        if max_log - shift > MAX_LOG_WEIGHT {
            shift = max_log - MAX_LOG_WEIGHT;
        }
        let mut w_tilde = DVector::zeros(particles_per_sensor);
        if max_log.is_finite() {
            for (w, &lv) in w_tilde.iter_mut().zip(logs.iter()) {
                *w = (lv - shift).exp();
            }
        }
        let w_sum = w_tilde.sum();
        if w_sum.is_nan() || w_sum <= 0.0 || !w_sum.is_finite() {
            diverged[sensor] = true;
            w_tilde.fill(1.0);
        }
        let pm = super::PartialMoments::from_weighted(particle_sets[sensor].states(), &w_tilde);
        for r in 0..m {
            payload[(sensor, r)] = pm.mean_sum[r];
        }
        let mut slot = m;
        for r in 0..m {
            for c in r..m {
                payload[(sensor, slot)] = pm.corr_sum[(r, c)];
                slot += 1;
            }
        }
        payload[(sensor, n_moments - 1)] = pm.weight_sum;
    }

    // Step 6: second consensus stage combines the partial moments.
    let sums = if ctx.config().exact_sums {
        let mut totals = DVector::zeros(n_moments);
        for c in 0..n_moments {
            totals[c] = payload.column(c).sum();
        }
        let mut rows = DMatrix::zeros(k, n_moments);
        for sensor in 0..k {
            for c in 0..n_moments {
                rows[(sensor, c)] = totals[c];
            }
        }
        rows
    } else {
        consensus_sum(
            net,
            weights,
            payload.as_view(),
            ctx.config().i_max,
            ConsensusStage::PosteriorMoments,
            ledger,
        )?
    };

    let mut estimates = Vec::with_capacity(k);
    for sensor in 0..k {
        let total_weight = sums[(sensor, n_moments - 1)];
        if total_weight.is_nan() || total_weight <= 0.0 || !total_weight.is_finite() {
            // Globally degenerate weights: fall back to the sensor's own
            // unweighted predicted moments and flag the divergence.
            diverged[sensor] = true;
            let mut uniform = particle_sets[sensor].clone();
            uniform.reset_uniform_weights();
            let (mu, cov) = weighted_moments(&uniform);
            beliefs[sensor] = GaussianBelief::new(mu, cov)?;
            estimates.push(beliefs[sensor].mean().clone());
            continue;
        }
        let mut mu = DVector::zeros(m);
        for r in 0..m {
            mu[r] = sums[(sensor, r)] / total_weight;
        }
        let mut cov = DMatrix::zeros(m, m);
        let mut slot = m;
        for r in 0..m {
            for c in r..m {
                let v = sums[(sensor, slot)] / total_weight;
                cov[(r, c)] = v;
                cov[(c, r)] = v;
                slot += 1;
            }
        }
        cov -= &mu * mu.transpose();
        beliefs[sensor] = GaussianBelief::new(mu, cov)?;
        estimates.push(beliefs[sensor].mean().clone());
    }
    Ok(DistributedStepOutput {
        estimates,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::cpf_step;
    use crate::filters::lc::{LcConfig, LcContext};
    use crate::likelihood::{identity_projection, FnMeasurement};
    use crate::network::{build_jittered_grid, metropolis_weights};
    use crate::rng::derive_rng;
    use approx::assert_abs_diff_eq;

    type ScalarModel = GaussianMeasurementModel<FnMeasurement<alloc::boxed::Box<dyn Fn(&[f64], &mut [f64])>>>;

    /// Toy setup: 2-D state, polynomial measurement functions of degree ≤ 2
    /// (inside the basis span, so the LC approximation is exact), small
    /// complete-ish network.
    struct Toy {
        net: SensorNetwork,
        weights: ConsensusWeights,
        trans: LinearGaussianTransition,
        models: Vec<ScalarModel>,
        coeffs: Vec<[f64; 4]>,
        sigma2: f64,
    }

    fn toy(k_side: usize, comm_range: f64, seed: u64) -> Toy {
        let mut rng = derive_rng(seed, &[100]);
        let k = k_side * k_side;
        let net = build_jittered_grid(k, 4.0, comm_range, 0.25, 100, &mut rng).unwrap();
        let weights = metropolis_weights(&net);
        let trans = LinearGaussianTransition::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            0.01,
        );
        let sigma2 = 0.5;
        let mut coeffs = Vec::new();
        let models: Vec<ScalarModel> = (0..k)
            .map(|_| {
                let c: [f64; 4] = [
                    rand::Rng::random_range(&mut rng, -1.0..1.0),
                    rand::Rng::random_range(&mut rng, -1.0..1.0),
                    rand::Rng::random_range(&mut rng, -1.0..1.0),
                    rand::Rng::random_range(&mut rng, -0.5..0.5),
                ];
                coeffs.push(c);
                let f: alloc::boxed::Box<dyn Fn(&[f64], &mut [f64])> =
                    alloc::boxed::Box::new(move |x: &[f64], out: &mut [f64]| {
                        out[0] = c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[1];
                    });
                GaussianMeasurementModel::scalar(FnMeasurement::new(1, f), sigma2).unwrap()
            })
            .collect();
        Toy {
            net,
            weights,
            trans,
            models,
            coeffs,
            sigma2,
        }
    }

    fn toy_exact_log_jlf<'a>(toy: &'a Toy, measurements: &[DVector<f64>]) -> impl Fn(&[f64]) -> f64 + 'a {
        let zs: Vec<f64> = measurements.iter().map(|z| z[0]).collect();
        move |x: &[f64]| {
            let mut acc = 0.0;
            for (c, z) in toy.coeffs.iter().zip(&zs) {
                let h = c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[1];
                acc -= (z - h) * (z - h) / (2.0 * toy.sigma2);
            }
            acc
        }
    }

    #[test]
    fn exact_sums_and_common_seeds_reproduce_cpf_weights() {
        // Polynomial h in span + exact sums: every sensor's LC-DPF weights
        // equal the centralized filter's weights when all random streams
        // coincide.
        let toy = toy(2, 10.0, 1);
        let k = toy.net.num_sensors();
        let ctx = LcContext::new(LcConfig {
            exact_sums: true,
            ..LcConfig::new(2, identity_projection(2), 0)
        })
        .unwrap();
        let j = 200;
        let measurements: Vec<DVector<f64>> =
            (0..k).map(|i| DVector::from_element(1, 0.3 * i as f64)).collect();

        let init = DMatrix::from_fn(2, j, |_, c| (c as f64 / j as f64) * 2.0 - 1.0);
        let mut sets: Vec<ParticleSet> =
            (0..k).map(|_| ParticleSet::uniform(init.clone())).collect();
        let mut rngs: Vec<_> = (0..k).map(|_| derive_rng(77, &[5])).collect();
        let mut ledger = TransmissionLedger::new();
        let out = lcdpf_step(
            &mut sets,
            &toy.trans,
            &ctx,
            &toy.net,
            &toy.weights,
            &mut ledger,
            &toy.models,
            &measurements,
            &mut rngs,
        )
        .unwrap();
        assert!(out.diverged.iter().all(|d| !d));
        assert_eq!(ledger.cumulative_total(), 0);

        let mut cpf_particles = ParticleSet::uniform(init);
        let mut cpf_rng = derive_rng(77, &[5]);
        let exact = toy_exact_log_jlf(&toy, &measurements);
        let cpf_out = cpf_step(&mut cpf_particles, &toy.trans, &exact, &mut cpf_rng).unwrap();

        for sensor in 0..k {
            for jj in 0..j {
                assert_abs_diff_eq!(
                    sets[sensor].weights()[jj],
                    cpf_particles.weights()[jj],
                    epsilon = 1e-9
                );
            }
            for d in 0..2 {
                assert_abs_diff_eq!(out.estimates[sensor][d], cpf_out.estimate[d], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn single_sensor_network_reduces_to_centralized() {
        // K = 1: the LC-DPF step is a CPF step driven by the (here exact)
        // approximate JLF.
        let toy = toy(1, 10.0, 2);
        let ctx = LcContext::new(LcConfig::new(2, identity_projection(2), 4)).unwrap();
        let j = 120;
        let measurements = alloc::vec![DVector::from_element(1, 1.0)];
        let init = DMatrix::from_fn(2, j, |_, c| (c as f64 * 0.013).sin());
        let mut sets = alloc::vec![ParticleSet::uniform(init.clone())];
        let mut rngs = alloc::vec![derive_rng(5, &[9])];
        let mut ledger = TransmissionLedger::new();
        let out = lcdpf_step(
            &mut sets,
            &toy.trans,
            &ctx,
            &toy.net,
            &toy.weights,
            &mut ledger,
            &toy.models,
            &measurements,
            &mut rngs,
        )
        .unwrap();

        let mut cpf_particles = ParticleSet::uniform(init);
        let mut cpf_rng = derive_rng(5, &[9]);
        let exact = toy_exact_log_jlf(&toy, &measurements);
        let cpf_out = cpf_step(&mut cpf_particles, &toy.trans, &exact, &mut cpf_rng).unwrap();
        for d in 0..2 {
            assert_abs_diff_eq!(out.estimates[0][d], cpf_out.estimate[d], epsilon = 1e-9);
        }
    }

    #[test]
    fn lcdgpf_moment_collapse_is_consistent() {
        // After one step each belief's covariance is symmetric PSD and the
        // estimate is the collapsed mean.
        let toy = toy(2, 10.0, 3);
        let k = toy.net.num_sensors();
        let ctx = LcContext::new(LcConfig::new(2, identity_projection(2), 30)).unwrap();
        let prior = GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let mut beliefs = alloc::vec![prior; k];
        let measurements: Vec<DVector<f64>> =
            (0..k).map(|_| DVector::from_element(1, 0.5)).collect();
        let mut rngs: Vec<_> = (0..k).map(|i| derive_rng(6, &[i as u64])).collect();
        let mut ledger = TransmissionLedger::new();
        let out = lcdgpf_step(
            &mut beliefs,
            400,
            &toy.trans,
            &ctx,
            &toy.net,
            &toy.weights,
            &mut ledger,
            &toy.models,
            &measurements,
            &mut rngs,
        )
        .unwrap();
        for sensor in 0..k {
            let cov = beliefs[sensor].cov();
            assert_abs_diff_eq!(cov[(0, 1)], cov[(1, 0)], epsilon = 1e-12);
            let eig = cov.clone().symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l >= 0.0));
            for d in 0..2 {
                assert_eq!(out.estimates[sensor][d], beliefs[sensor].mean()[d]);
            }
        }
    }

    #[test]
    fn rlcdgpf_exact_sums_match_pooled_moments() {
        // With exact second-stage sums, the combined (μ, C) equal the
        // moments of the union of all sensors' weighted particles.
        let toy = toy(2, 10.0, 4);
        let k = toy.net.num_sensors();
        let j_prime = 80;
        let ctx = LcContext::new(LcConfig {
            exact_sums: true,
            ..LcConfig::new(2, identity_projection(2), 0)
        })
        .unwrap();
        let prior = GaussianBelief::new(
            DVector::from_column_slice(&[0.2, -0.1]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let mut beliefs = alloc::vec![prior; k];
        let measurements: Vec<DVector<f64>> =
            (0..k).map(|i| DVector::from_element(1, 0.2 * i as f64)).collect();

        // Capture the sampled/propagated particles by replaying the same
        // streams through the sampling path.
        let mut replay_rngs: Vec<_> = (0..k).map(|i| derive_rng(8, &[i as u64])).collect();
        let mut pooled_states = Vec::new();
        let mut pooled_logs = Vec::new();
        {
            let exact = toy_exact_log_jlf(&toy, &measurements);
            for sensor in 0..k {
                let mut ps = beliefs[sensor].sample(j_prime, &mut replay_rngs[sensor]);
                propagate(&mut ps, &toy.trans, &mut replay_rngs[sensor]);
                for jj in 0..j_prime {
                    let x = ps.particle(jj).to_vec();
                    pooled_logs.push(exact(&x));
                    pooled_states.push(x);
                }
            }
        }

        let mut rngs: Vec<_> = (0..k).map(|i| derive_rng(8, &[i as u64])).collect();
        let mut ledger = TransmissionLedger::new();
        let out = rlcdgpf_step(
            &mut beliefs,
            j_prime,
            &toy.trans,
            &ctx,
            &toy.net,
            &toy.weights,
            &mut ledger,
            &toy.models,
            &measurements,
            &mut rngs,
        )
        .unwrap();
        assert!(out.diverged.iter().all(|d| !d));

        // Oracle: normalized weighted moments of the pooled particles (the
        // common shift cancels here).
        let n = pooled_states.len();
        let max_log = pooled_logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = pooled_logs.iter().map(|l| (l - max_log).exp()).collect();
        let wsum: f64 = w.iter().sum();
        let mut mu = [0.0; 2];
        for i in 0..n {
            mu[0] += w[i] * pooled_states[i][0] / wsum;
            mu[1] += w[i] * pooled_states[i][1] / wsum;
        }
        let mut cov = [[0.0; 2]; 2];
        for i in 0..n {
            for r in 0..2 {
                for c in 0..2 {
                    cov[r][c] += w[i] * pooled_states[i][r] * pooled_states[i][c] / wsum;
                }
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                cov[r][c] -= mu[r] * mu[c];
            }
        }

        for sensor in 0..k {
            for d in 0..2 {
                assert!(
                    (out.estimates[sensor][d] - mu[d]).abs() <= 1e-10 * mu[d].abs().max(1.0),
                    "sensor {sensor} mean component {d}"
                );
            }
            for r in 0..2 {
                for c in 0..2 {
                    assert!(
                        (beliefs[sensor].cov()[(r, c)] - cov[r][c]).abs()
                            <= 1e-10 * cov[r][c].abs().max(1.0),
                        "sensor {sensor} cov ({r},{c})"
                    );
                }
            }
        }
    }

    #[test]
    fn rlcdgpf_rejects_too_few_particles() {
        let toy = toy(2, 10.0, 5);
        let k = toy.net.num_sensors();
        let ctx = LcContext::new(LcConfig::new(2, identity_projection(2), 4)).unwrap();
        let prior = GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let mut beliefs = alloc::vec![prior; k];
        let measurements: Vec<DVector<f64>> =
            (0..k).map(|_| DVector::from_element(1, 0.0)).collect();
        let mut rngs: Vec<_> = (0..k).map(|i| derive_rng(9, &[i as u64])).collect();
        let mut ledger = TransmissionLedger::new();
        let err = rlcdgpf_step(
            &mut beliefs,
            3,
            &toy.trans,
            &ctx,
            &toy.net,
            &toy.weights,
            &mut ledger,
            &toy.models,
            &measurements,
            &mut rngs,
        )
        .unwrap_err();
        assert!(matches!(err, FilterError::TooFewParticles { needed: 6, .. }));
    }

    #[test]
    fn rlcdgpf_moment_stage_ledger_counts() {
        // N_c' = M + M(M+1)/2 + 1 additional scalars per sensor-iteration.
        let toy = toy(2, 10.0, 6);
        let k = toy.net.num_sensors();
        let i_max = 4;
        let ctx = LcContext::new(LcConfig::new(2, identity_projection(2), i_max)).unwrap();
        let prior = GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let mut beliefs = alloc::vec![prior; k];
        let measurements: Vec<DVector<f64>> =
            (0..k).map(|_| DVector::from_element(1, 0.1)).collect();
        let mut rngs: Vec<_> = (0..k).map(|i| derive_rng(10, &[i as u64])).collect();
        let mut ledger = TransmissionLedger::new();
        rlcdgpf_step(
            &mut beliefs,
            50,
            &toy.trans,
            &ctx,
            &toy.net,
            &toy.weights,
            &mut ledger,
            &toy.models,
            &measurements,
            &mut rngs,
        )
        .unwrap();
        let m = 2;
        let n_c = ctx.num_consensus_coefficients();
        let n_c_prime = m + m * (m + 1) / 2 + 1;
        let (jlf, moments) = ledger.cumulative_counts();
        assert_eq!(jlf, (k * i_max * n_c) as u64);
        assert_eq!(moments, (k * i_max * n_c_prime) as u64);
    }
}
