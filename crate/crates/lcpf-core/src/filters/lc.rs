//! The likelihood-consensus stage shared by the distributed filters.
//!
//! Each sensor fits its measurement function on its own predicted particles,
//! assembles the per-sensor coefficient vector `β`, and the network sums the
//! non-constant coefficients by average consensus (or exactly, in the
//! impractical reference mode). Every sensor ends up with its own estimate
//! of the joint statistic and can evaluate the approximate log-JLF locally.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::basis::{LsOptions, PolynomialBasis};
use crate::likelihood::{
    fit_alpha, gamma_direct, gamma_indirect_gaussian_with, local_beta, project_states,
    ExpFamilyModel, GaussianMeasurementModel, JlfStatistic, MeasurementFn, ProductTable,
};
use crate::network::{consensus_sum, ConsensusStage, ConsensusWeights, SensorNetwork, TransmissionLedger};

use super::{FilterError, ParticleSet};

/// How each sensor obtains its `γ` coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaMode {
    /// Algebraically from the fitted `ã` (Gaussian noise only). Cheaper,
    /// and the resulting approximate JLF is a valid pdf.
    #[default]
    Indirect,
    /// A separate least-squares fit of `d(x)` on the `ψ` basis.
    DirectLs,
}

/// Configuration of the likelihood-consensus stage.
#[derive(Debug, Clone)]
pub struct LcConfig {
    /// Degree `R_p` of the polynomial approximation of the measurement
    /// functions.
    pub poly_degree: u32,
    /// State coordinates the basis ranges over (e.g. the positions).
    pub projection: Vec<usize>,
    /// Consensus iterations per statistic coefficient.
    pub i_max: usize,
    /// Replace consensus by exact summation (reference mode; transmits
    /// nothing).
    pub exact_sums: bool,
    pub gamma_mode: GammaMode,
    pub ls: LsOptions,
}

impl LcConfig {
    pub fn new(poly_degree: u32, projection: Vec<usize>, i_max: usize) -> Self {
        Self {
            poly_degree,
            projection,
            i_max,
            exact_sums: false,
            gamma_mode: GammaMode::Indirect,
            ls: LsOptions::default(),
        }
    }
}

/// Bases and index tables derived from an [`LcConfig`], built once per
/// experiment and shared by all sensors.
pub struct LcContext {
    config: LcConfig,
    phi: Arc<PolynomialBasis>,
    psi: Arc<PolynomialBasis>,
    table: ProductTable,
}

impl LcContext {
    pub fn new(config: LcConfig) -> Result<Self, FilterError> {
        let dim = config.projection.len();
        let phi = Arc::new(PolynomialBasis::new(dim, config.poly_degree).map_err(
            crate::likelihood::LikelihoodError::Basis,
        )?);
        let psi = Arc::new(
            PolynomialBasis::new(dim, 2 * config.poly_degree)
                .map_err(crate::likelihood::LikelihoodError::Basis)?,
        );
        let table = ProductTable::new(&phi, &psi)?;
        Ok(Self {
            config,
            phi,
            psi,
            table,
        })
    }

    pub fn config(&self) -> &LcConfig {
        &self.config
    }

    pub fn phi(&self) -> &Arc<PolynomialBasis> {
        &self.phi
    }

    pub fn psi(&self) -> &Arc<PolynomialBasis> {
        &self.psi
    }

    /// Number of parallel scalar consensus instances, `N_c`. The constant
    /// coefficient is excluded from the payload.
    pub fn num_consensus_coefficients(&self) -> usize {
        self.psi.len() - 1
    }

    /// Minimum number of fitting points a sensor needs per step.
    pub fn min_fit_points(&self) -> usize {
        match self.config.gamma_mode {
            GammaMode::Indirect => self.phi.len(),
            GammaMode::DirectLs => self.phi.len().max(self.psi.len()),
        }
    }

    /// Restricts full-state particles to the basis coordinates.
    pub fn project(&self, particles: &ParticleSet) -> DMatrix<f64> {
        project_states(particles.states().as_view(), &self.config.projection)
    }

    /// One sensor's summand coefficients `β` (constant included), fitted on
    /// its own predicted particles and its own measurement.
    pub fn local_beta_for<H: MeasurementFn>(
        &self,
        model: &GaussianMeasurementModel<H>,
        predicted: &ParticleSet,
        measurement: &DVector<f64>,
    ) -> Result<DVector<f64>, FilterError> {
        if predicted.len() < self.min_fit_points() {
            return Err(FilterError::TooFewParticles {
                context: "likelihood consensus fit",
                needed: self.min_fit_points(),
                got: predicted.len(),
            });
        }
        let alpha = fit_alpha(
            model,
            &self.phi,
            predicted.states().as_view(),
            &self.config.projection,
            &self.config.ls,
        )?;
        let gamma = match self.config.gamma_mode {
            GammaMode::Indirect => {
                gamma_indirect_gaussian_with(&alpha, model.noise_cov_inv(), &self.table)?
            }
            GammaMode::DirectLs => gamma_direct(
                model,
                &self.psi,
                predicted.states().as_view(),
                &self.config.projection,
                &self.config.ls,
            )?,
        };
        let mut b = DVector::zeros(model.natural_dim());
        model.b_into(measurement.as_slice(), b.as_mut_slice());
        Ok(local_beta(&alpha, &gamma, &b)?)
    }

    /// Runs the full LC stage: per-sensor fits, then the consensus (or exact
    /// summation) of the non-constant coefficients. Returns each sensor's
    /// statistic.
    pub fn run_stage<H: MeasurementFn>(
        &self,
        net: &SensorNetwork,
        weights: &ConsensusWeights,
        ledger: &mut TransmissionLedger,
        models: &[GaussianMeasurementModel<H>],
        predicted: &[ParticleSet],
        measurements: &[DVector<f64>],
    ) -> Result<Vec<JlfStatistic>, FilterError> {
        let k = net.num_sensors();
        if models.len() != k || predicted.len() != k || measurements.len() != k {
            return Err(FilterError::DimensionMismatch {
                expected: k,
                got: models.len().min(predicted.len()).min(measurements.len()),
            });
        }
        let n_c = self.num_consensus_coefficients();
        let mut payload = DMatrix::zeros(k, n_c);
        for sensor in 0..k {
            let beta = self.local_beta_for(&models[sensor], &predicted[sensor], &measurements[sensor])?;
            for c in 0..n_c {
                payload[(sensor, c)] = beta[c + 1];
            }
        }
        let per_sensor = if self.config.exact_sums {
            let mut totals = DVector::zeros(n_c);
            for c in 0..n_c {
                totals[c] = payload.column(c).sum();
            }
            let mut rows = DMatrix::zeros(k, n_c);
            for sensor in 0..k {
                for c in 0..n_c {
                    rows[(sensor, c)] = totals[c];
                }
            }
            rows
        } else {
            consensus_sum(
                net,
                weights,
                payload.as_view(),
                self.config.i_max,
                ConsensusStage::JlfCoefficients,
                ledger,
            )?
        };
        let mut stats = Vec::with_capacity(k);
        for sensor in 0..k {
            let coeffs = per_sensor.row(sensor).transpose();
            stats.push(JlfStatistic::poly_gaussian(self.psi.clone(), coeffs)?);
        }
        Ok(stats)
    }
}
