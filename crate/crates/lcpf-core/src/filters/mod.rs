//! Centralized and consensus-based distributed particle filters.
//!
//! Five filters share the machinery here: a centralized sequential
//! importance resampling filter and a centralized Gaussian particle filter
//! (which see every measurement directly), plus their distributed
//! counterparts in which each sensor evaluates an approximate joint
//! likelihood obtained through likelihood consensus ([`lc`]).

mod centralized;
mod distributed;
pub mod lc;

pub use centralized::{cgpf_step, cpf_step, StepOutput};
pub use distributed::{lcdgpf_step, lcdpf_step, rlcdgpf_step, DistributedStepOutput};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)]
use num_traits::Float as _;

use crate::likelihood::LikelihoodError;
use crate::network::NetworkError;

/// Smallest eigenvalue kept in a posterior covariance; repair floors
/// anything below this before sampling.
pub const COV_EIGENVALUE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("particle weights are degenerate (zero, negative, or non-finite)")]
    DegenerateWeights,
    #[error("all particle log-likelihoods underflowed; the filter diverged")]
    Divergence,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{context}: needs at least {needed} particles, got {got}")]
    TooFewParticles {
        context: &'static str,
        needed: usize,
        got: usize,
    },
}

/// A weighted particle cloud. States are columns of an `M_state × J` matrix;
/// weights are kept normalized (they sum to one within 1e-12).
#[derive(Debug, Clone)]
pub struct ParticleSet {
    states: DMatrix<f64>,
    weights: DVector<f64>,
}

impl ParticleSet {
    pub fn new(states: DMatrix<f64>, weights: DVector<f64>) -> Result<Self, FilterError> {
        if weights.len() != states.ncols() {
            return Err(FilterError::DimensionMismatch {
                expected: states.ncols(),
                got: weights.len(),
            });
        }
        let mut ps = Self { states, weights };
        ps.set_weights_normalized()?;
        Ok(ps)
    }

    /// Particles with uniform weights `1/J`.
    pub fn uniform(states: DMatrix<f64>) -> Self {
        let j = states.ncols();
        Self {
            states,
            weights: DVector::from_element(j, 1.0 / j as f64),
        }
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Contiguous view of particle `j`.
    pub fn particle(&self, j: usize) -> &[f64] {
        let m = self.state_dim();
        &self.states.as_slice()[j * m..(j + 1) * m]
    }

    pub fn reset_uniform_weights(&mut self) {
        let j = self.len();
        self.weights.fill(1.0 / j as f64);
    }

    /// Validates and renormalizes the weight vector.
    fn set_weights_normalized(&mut self) -> Result<(), FilterError> {
        let mut sum = 0.0;
        for &w in self.weights.iter() {
            if !w.is_finite() || w < 0.0 {
                return Err(FilterError::DegenerateWeights);
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(FilterError::DegenerateWeights);
        }
        self.weights /= sum;
        Ok(())
    }
}

/// Linear-Gaussian state transition `x' = G·x + W·u`, `u ~ N(0, σ_u²·I)`.
#[derive(Debug, Clone)]
pub struct LinearGaussianTransition {
    g: DMatrix<f64>,
    w: DMatrix<f64>,
    driving_noise_var: f64,
}

impl LinearGaussianTransition {
    pub fn new(g: DMatrix<f64>, w: DMatrix<f64>, driving_noise_var: f64) -> Self {
        assert_eq!(g.nrows(), g.ncols(), "G must be square");
        assert_eq!(w.nrows(), g.nrows(), "W rows must match the state dim");
        assert!(driving_noise_var >= 0.0);
        Self {
            g,
            w,
            driving_noise_var,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn driving_noise_var(&self) -> f64 {
        self.driving_noise_var
    }

    /// Noiseless image `G·x`.
    pub fn predict_mean(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.g * x
    }

    /// One random transition of a single state.
    pub fn sample_one<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let mut next = self.predict_mean(x);
        let sigma = self.driving_noise_var.sqrt();
        if sigma > 0.0 {
            let noise = DVector::from_fn(self.noise_dim(), |_, _| {
                sigma * rng.sample::<f64, _>(StandardNormal)
            });
            next += &self.w * noise;
        }
        next
    }
}

/// Systematic resampling: draws `J` particles with replacement, particle
/// `j'` selected with probability `w^{(j')}`; the output has uniform
/// weights. Copy counts deviate from `J·w` by less than one.
pub fn systematic_resample<R: Rng + ?Sized>(
    ps: &ParticleSet,
    rng: &mut R,
) -> Result<ParticleSet, FilterError> {
    let j = ps.len();
    let sum: f64 = ps.weights.iter().sum();
    if sum.is_nan() || sum <= 0.0 || ps.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(FilterError::DegenerateWeights);
    }
    let step = sum / j as f64;
    let mut threshold = rng.random_range(0.0..step);
    let m = ps.state_dim();
    let mut out = DMatrix::zeros(m, j);
    let mut cumulative = ps.weights[0];
    let mut src = 0usize;
    for dst in 0..j {
        while threshold > cumulative && src + 1 < j {
            src += 1;
            cumulative += ps.weights[src];
        }
        out.column_mut(dst).copy_from(&ps.states.column(src));
        threshold += step;
    }
    Ok(ParticleSet::uniform(out))
}

/// Draws each particle's successor from the state-transition density:
/// every column `x` is replaced by a sample of `N(G·x, σ_u²·W·Wᵀ)`.
/// Weights are left unchanged.
pub fn propagate<R: Rng + ?Sized>(
    ps: &mut ParticleSet,
    trans: &LinearGaussianTransition,
    rng: &mut R,
) {
    let j = ps.len();
    let mut next = &trans.g * &ps.states;
    let sigma = trans.driving_noise_var.sqrt();
    if sigma > 0.0 {
        let noise = DMatrix::from_fn(trans.noise_dim(), j, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        next.gemm(sigma, &trans.w, &noise, 1.0);
    }
    ps.states = next;
}

/// Replaces the weights by the normalized exponentials of `log_values`
/// (max-subtraction guards against overflow). Adding any constant to all
/// log values leaves the result unchanged.
pub fn weight_update_from_logs(
    ps: &mut ParticleSet,
    log_values: &DVector<f64>,
) -> Result<(), FilterError> {
    if log_values.len() != ps.len() {
        return Err(FilterError::DimensionMismatch {
            expected: ps.len(),
            got: log_values.len(),
        });
    }
    let max = log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(FilterError::Divergence);
    }
    let mut sum = 0.0;
    for (w, &lv) in ps.weights.iter_mut().zip(log_values.iter()) {
        let v = (lv - max).exp();
        *w = v;
        sum += v;
    }
    if sum.is_nan() || sum <= 0.0 || !sum.is_finite() {
        return Err(FilterError::Divergence);
    }
    ps.weights /= sum;
    Ok(())
}

/// [`weight_update_from_logs`] with the log-JLF evaluated at each particle.
pub fn weight_update(
    ps: &mut ParticleSet,
    mut log_jlf: impl FnMut(&[f64]) -> f64,
) -> Result<(), FilterError> {
    let logs = DVector::from_fn(ps.len(), |j, _| log_jlf(ps.particle(j)));
    weight_update_from_logs(ps, &logs)
}

/// Weighted sample mean `Σ_j w^{(j)}·x^{(j)}`.
pub fn point_estimate(ps: &ParticleSet) -> DVector<f64> {
    &ps.states * &ps.weights
}

/// Weighted mean and covariance: `μ = Σ w x`, `C = Σ w x xᵀ − μμᵀ`.
pub fn weighted_moments(ps: &ParticleSet) -> (DVector<f64>, DMatrix<f64>) {
    let mu = point_estimate(ps);
    let m = ps.state_dim();
    let j = ps.len();
    let mut scaled = ps.states.clone();
    for jj in 0..j {
        let w = ps.weights[jj];
        scaled.column_mut(jj).scale_mut(w);
    }
    let mut cov = DMatrix::zeros(m, m);
    cov.gemm(1.0, &scaled, &ps.states.transpose(), 0.0);
    cov -= &mu * mu.transpose();
    (mu, cov)
}

/// Nonnormalized partial moments of one sensor's weighted particles:
/// `μ' = Σ w̃ x`, `R' = Σ w̃ x xᵀ`, `W̃ = Σ w̃`.
#[derive(Debug, Clone)]
pub struct PartialMoments {
    pub mean_sum: DVector<f64>,
    pub corr_sum: DMatrix<f64>,
    pub weight_sum: f64,
}

impl PartialMoments {
    pub fn from_weighted(states: &DMatrix<f64>, weights: &DVector<f64>) -> Self {
        let m = states.nrows();
        let j = states.ncols();
        debug_assert_eq!(weights.len(), j);
        let mean_sum = states * weights;
        let mut scaled = states.clone();
        for jj in 0..j {
            scaled.column_mut(jj).scale_mut(weights[jj]);
        }
        let mut corr_sum = DMatrix::zeros(m, m);
        corr_sum.gemm(1.0, &scaled, &states.transpose(), 0.0);
        Self {
            mean_sum,
            corr_sum,
            weight_sum: weights.sum(),
        }
    }
}

/// Gaussian posterior approximation: mean and covariance.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianBelief {
    /// Stores the belief with the covariance repaired: symmetrized and with
    /// eigenvalues floored at [`COV_EIGENVALUE_FLOOR`].
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, FilterError> {
        let m = mean.len();
        if cov.nrows() != m || cov.ncols() != m {
            return Err(FilterError::DimensionMismatch {
                expected: m,
                got: cov.nrows(),
            });
        }
        if !mean.iter().all(|v| v.is_finite()) || !cov.iter().all(|v| v.is_finite()) {
            return Err(FilterError::DegenerateWeights);
        }
        Ok(Self {
            mean,
            cov: repair_covariance(&cov),
        })
    }

    /// Moment-matches a weighted particle set.
    pub fn from_weighted_particles(ps: &ParticleSet) -> Result<Self, FilterError> {
        let (mu, cov) = weighted_moments(ps);
        Self::new(mu, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Draws `j` particles from `N(μ, C)` with uniform weights.
    pub fn sample<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> ParticleSet {
        let m = self.dim();
        let factor = covariance_sqrt(&self.cov);
        let noise = DMatrix::from_fn(m, j, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut states = DMatrix::zeros(m, j);
        states.gemm(1.0, &factor, &noise, 0.0);
        for jj in 0..j {
            let mut col = states.column_mut(jj);
            col += &self.mean;
        }
        ParticleSet::uniform(states)
    }
}

/// Symmetrizes and floors the eigenvalues of a covariance matrix.
pub fn repair_covariance(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (cov + cov.transpose()) * 0.5;
    let mut eig = sym.symmetric_eigen();
    for l in eig.eigenvalues.iter_mut() {
        if *l < COV_EIGENVALUE_FLOOR {
            *l = COV_EIGENVALUE_FLOOR;
        }
    }
    &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues)
        * eig.eigenvectors.transpose()
}

/// Symmetric square-root factor `F` with `F·Fᵀ` equal to the repaired
/// covariance.
fn covariance_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (cov + cov.transpose()) * 0.5;
    let mut eig = sym.symmetric_eigen();
    for l in eig.eigenvalues.iter_mut() {
        *l = l.max(COV_EIGENVALUE_FLOOR).sqrt();
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues)
}
