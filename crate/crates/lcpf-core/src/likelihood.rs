//! Exponential-family local likelihood models and the sufficient statistic
//! describing an approximate joint likelihood function (JLF).
//!
//! A sensor's local likelihood has the form
//! `f(z|x) = c(z)·exp(aᵀ(x)·b(z) − d(x))`. Expanding `a` and `d` on bases
//! shared by all sensors turns the log-JLF into a sum of per-sensor
//! coefficient vectors, which a network can aggregate by averaging. For
//! additive Gaussian noise, `a` is the measurement function itself and `d`
//! follows from `a` algebraically, so only one fit per sensor is needed.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DMatrixView, DVector};

#[allow(unused_imports)]
use num_traits::Float as _;

use crate::basis::{ls_fit, BasisError, BasisExpansion, LsOptions, PolynomialBasis};

pub const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LikelihoodError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("noise covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("per-sensor statistics do not share a layout: expected {expected}, got {got}")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("coefficient basis mismatch: {0}")]
    BasisMismatch(&'static str),
}

/// A deterministic measurement function `h: R^{M_state} → R^{N_k}`.
pub trait MeasurementFn {
    fn output_dim(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]);
}

/// Wraps a closure as a [`MeasurementFn`] with a declared output dimension.
#[derive(Clone)]
pub struct FnMeasurement<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnMeasurement<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> MeasurementFn for FnMeasurement<F> {
    fn output_dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Local likelihood in exponential-family form,
/// `f(z|x) = c(z)·exp(aᵀ(x)·b(z) − d(x))` with `a, b ∈ R^q`.
pub trait ExpFamilyModel {
    /// Dimension `q` of the natural pairing.
    fn natural_dim(&self) -> usize;
    /// Dimension of the measurement vector `z`.
    fn measurement_dim(&self) -> usize;
    /// `a(x)`, written into `out` (length `q`).
    fn a_into(&self, x: &[f64], out: &mut [f64]);
    /// `b(z)`, written into `out` (length `q`).
    fn b_into(&self, z: &[f64], out: &mut [f64]);
    /// `log c(z)`.
    fn log_c(&self, z: &[f64]) -> f64;
    /// `d(x)`.
    fn d(&self, x: &[f64]) -> f64;

    /// `log f(z|x) = log c(z) + aᵀ(x)·b(z) − d(x)`.
    fn log_likelihood(&self, z: &[f64], x: &[f64]) -> f64 {
        let q = self.natural_dim();
        let mut a = vec![0.0; q];
        let mut b = vec![0.0; q];
        self.a_into(x, &mut a);
        self.b_into(z, &mut b);
        let pairing: f64 = a.iter().zip(&b).map(|(ai, bi)| ai * bi).sum();
        self.log_c(z) + pairing - self.d(x)
    }
}

/// Additive-Gaussian-noise measurement model `z = h(x) + v`, `v ~ N(0, Q)`.
///
/// This is the exponential-family member with `a = h`, `b = Q⁻¹z`,
/// `d = ½·hᵀQ⁻¹h` and `c(z) = c̄·exp(−½·zᵀQ⁻¹z)`.
pub struct GaussianMeasurementModel<H> {
    h: H,
    noise_cov: DMatrix<f64>,
    noise_cov_inv: DMatrix<f64>,
    /// `log c̄ = −½(N·ln 2π + ln det Q)`.
    log_norm: f64,
}

impl<H: MeasurementFn> GaussianMeasurementModel<H> {
    pub fn new(h: H, noise_cov: DMatrix<f64>) -> Result<Self, LikelihoodError> {
        let n = h.output_dim();
        if noise_cov.nrows() != n || noise_cov.ncols() != n {
            return Err(LikelihoodError::DimensionMismatch {
                expected: n,
                got: noise_cov.nrows(),
            });
        }
        if (noise_cov.clone() - noise_cov.transpose()).amax() > 1e-12 * noise_cov.amax() {
            return Err(LikelihoodError::NotPositiveDefinite);
        }
        let chol = noise_cov
            .clone()
            .cholesky()
            .ok_or(LikelihoodError::NotPositiveDefinite)?;
        let log_det = 2.0 * (0..n).map(|i| chol.l()[(i, i)].ln()).sum::<f64>();
        let noise_cov_inv = chol.inverse();
        Ok(Self {
            h,
            noise_cov,
            noise_cov_inv,
            log_norm: -0.5 * (n as f64 * LN_2PI + log_det),
        })
    }

    /// Scalar-measurement convenience constructor.
    pub fn scalar(h: H, noise_var: f64) -> Result<Self, LikelihoodError> {
        Self::new(h, DMatrix::from_element(1, 1, noise_var))
    }

    pub fn measurement_fn(&self) -> &H {
        &self.h
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn noise_cov_inv(&self) -> &DMatrix<f64> {
        &self.noise_cov_inv
    }
}

impl<H: MeasurementFn> ExpFamilyModel for GaussianMeasurementModel<H> {
    fn natural_dim(&self) -> usize {
        self.h.output_dim()
    }

    fn measurement_dim(&self) -> usize {
        self.h.output_dim()
    }

    fn a_into(&self, x: &[f64], out: &mut [f64]) {
        self.h.eval_into(x, out);
    }

    fn b_into(&self, z: &[f64], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &zj) in z.iter().enumerate() {
                acc += self.noise_cov_inv[(i, j)] * zj;
            }
            *slot = acc;
        }
    }

    fn log_c(&self, z: &[f64]) -> f64 {
        let n = self.measurement_dim();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += z[i] * self.noise_cov_inv[(i, j)] * z[j];
            }
        }
        self.log_norm - 0.5 * quad
    }

    fn d(&self, x: &[f64]) -> f64 {
        let n = self.measurement_dim();
        let mut h = vec![0.0; n];
        self.h.eval_into(x, &mut h);
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += h[i] * self.noise_cov_inv[(i, j)] * h[j];
            }
        }
        0.5 * quad
    }
}

/// Copies the selected state coordinates (one point per column) into a new
/// matrix, e.g. the position rows `[0, 1, 4, 5]` of two 4-D target states.
pub fn project_states(points: DMatrixView<'_, f64>, projection: &[usize]) -> DMatrix<f64> {
    let j = points.ncols();
    let mut out = DMatrix::zeros(projection.len(), j);
    for (row, &src) in projection.iter().enumerate() {
        for col in 0..j {
            out[(row, col)] = points[(src, col)];
        }
    }
    out
}

/// Projection for states whose every coordinate feeds the basis.
pub fn identity_projection(dim: usize) -> Vec<usize> {
    (0..dim).collect()
}

/// Least-squares coefficients of `a(x)` on the `φ` basis.
///
/// `points` are full state vectors (one per column); `projection` picks the
/// coordinates the basis ranges over. The fit targets are `a` evaluated on
/// the full states.
pub fn fit_alpha<M: ExpFamilyModel>(
    model: &M,
    basis: &Arc<PolynomialBasis>,
    points: DMatrixView<'_, f64>,
    projection: &[usize],
    opts: &LsOptions,
) -> Result<BasisExpansion, LikelihoodError> {
    let q = model.natural_dim();
    let j = points.ncols();
    let mut targets = DMatrix::zeros(j, q);
    let mut x = vec![0.0; points.nrows()];
    let mut row = vec![0.0; q];
    for jj in 0..j {
        for (m, slot) in x.iter_mut().enumerate() {
            *slot = points[(m, jj)];
        }
        model.a_into(&x, &mut row);
        for (c, &v) in row.iter().enumerate() {
            targets[(jj, c)] = v;
        }
    }
    let proj = project_states(points, projection);
    Ok(ls_fit(basis, proj.as_view(), targets.as_view(), opts)?)
}

/// Least-squares coefficients of `d(x)` on the `ψ` basis (the direct route).
pub fn gamma_direct<M: ExpFamilyModel>(
    model: &M,
    psi_basis: &Arc<PolynomialBasis>,
    points: DMatrixView<'_, f64>,
    projection: &[usize],
    opts: &LsOptions,
) -> Result<DVector<f64>, LikelihoodError> {
    let j = points.ncols();
    let mut targets = DMatrix::zeros(j, 1);
    let mut x = vec![0.0; points.nrows()];
    for jj in 0..j {
        for (m, slot) in x.iter_mut().enumerate() {
            *slot = points[(m, jj)];
        }
        targets[(jj, 0)] = model.d(&x);
    }
    let proj = project_states(points, projection);
    let fit = ls_fit(psi_basis, proj.as_view(), targets.as_view(), opts)?;
    Ok(fit.coeffs().column(0).into_owned())
}

/// Precomputed index map for products of monomial pairs: entry `(i, j)` is
/// the position of `r_i + r_j` in the `ψ` basis.
pub struct ProductTable {
    n_phi: usize,
    psi_len: usize,
    pair_to_psi: Vec<usize>,
}

impl ProductTable {
    pub fn new(phi: &PolynomialBasis, psi: &PolynomialBasis) -> Result<Self, LikelihoodError> {
        if phi.dim() != psi.dim() {
            return Err(LikelihoodError::BasisMismatch(
                "φ and ψ bases have different variable counts",
            ));
        }
        if psi.degree() < 2 * phi.degree() {
            return Err(LikelihoodError::BasisMismatch(
                "ψ degree must be at least twice the φ degree",
            ));
        }
        let n = phi.len();
        let mut pair_to_psi = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let sum = phi.indices()[i].checked_add(&phi.indices()[j])?;
                let pos = psi.position_of(&sum).ok_or(LikelihoodError::BasisMismatch(
                    "product index missing from ψ basis",
                ))?;
                pair_to_psi.push(pos);
            }
        }
        Ok(Self {
            n_phi: n,
            psi_len: psi.len(),
            pair_to_psi,
        })
    }
}

/// Indirect `γ` coefficients for Gaussian noise: substituting the fitted `ã`
/// into `d = ½·aᵀQ⁻¹a` yields `γ_r = ½·Σ_{r'+r''=r} α_{r'}ᵀ Q⁻¹ α_{r''}`,
/// a vector over the `ψ` basis of degree `2R_p`. The resulting `d̃` equals
/// `½·ãᵀ(x)Q⁻¹ã(x)` pointwise.
pub fn gamma_indirect_gaussian(
    alpha: &BasisExpansion,
    q_inv: &DMatrix<f64>,
) -> Result<(Arc<PolynomialBasis>, DVector<f64>), LikelihoodError> {
    let phi = alpha.basis();
    let psi = Arc::new(PolynomialBasis::new(phi.dim(), 2 * phi.degree())?);
    let table = ProductTable::new(phi, &psi)?;
    let gamma = gamma_indirect_gaussian_with(alpha, q_inv, &table)?;
    Ok((psi, gamma))
}

/// [`gamma_indirect_gaussian`] with a caller-cached [`ProductTable`].
pub fn gamma_indirect_gaussian_with(
    alpha: &BasisExpansion,
    q_inv: &DMatrix<f64>,
    table: &ProductTable,
) -> Result<DVector<f64>, LikelihoodError> {
    let n = alpha.basis().len();
    if n != table.n_phi {
        return Err(LikelihoodError::BasisMismatch(
            "product table built for a different φ basis",
        ));
    }
    if q_inv.nrows() != alpha.codomain_dim() {
        return Err(LikelihoodError::DimensionMismatch {
            expected: alpha.codomain_dim(),
            got: q_inv.nrows(),
        });
    }
    // P[i,j] = α_iᵀ Q⁻¹ α_j for every pair of φ indices.
    let pairings = alpha.coeffs() * q_inv * alpha.coeffs().transpose();
    let mut gamma = DVector::zeros(table.psi_len);
    for i in 0..n {
        for j in 0..n {
            gamma[table.pair_to_psi[i * n + j]] += 0.5 * pairings[(i, j)];
        }
    }
    Ok(gamma)
}

/// Per-sensor coefficients of the log-JLF summand over the `ψ` basis:
/// `β_r = α_rᵀ·b(z) − γ_r` for `|r| ≤ R_p` and `β_r = −γ_r` beyond.
///
/// Relies on the graded-lexicographic layout, in which the `φ` indices are
/// exactly the leading entries of the `ψ` basis.
pub fn local_beta(
    alpha: &BasisExpansion,
    gamma: &DVector<f64>,
    b_of_z: &DVector<f64>,
) -> Result<DVector<f64>, LikelihoodError> {
    let n_phi = alpha.basis().len();
    if gamma.len() < n_phi {
        return Err(LikelihoodError::LayoutMismatch {
            expected: n_phi,
            got: gamma.len(),
        });
    }
    if b_of_z.len() != alpha.codomain_dim() {
        return Err(LikelihoodError::DimensionMismatch {
            expected: alpha.codomain_dim(),
            got: b_of_z.len(),
        });
    }
    let mut beta = -gamma.clone();
    let alpha_b = alpha.coeffs() * b_of_z;
    for r in 0..n_phi {
        beta[r] += alpha_b[r];
    }
    Ok(beta)
}

/// The consensus-computed description of an approximate JLF.
#[derive(Debug, Clone)]
pub enum JlfForm {
    /// Generic exponential family: `S̃(x) = Σ_r A_r·φ_r(x) − Σ_r Γ_r·ψ_r(x)`.
    General {
        phi: Arc<PolynomialBasis>,
        psi: Arc<PolynomialBasis>,
        a_coeffs: DVector<f64>,
        gamma: DVector<f64>,
    },
    /// Gaussian noise with polynomial measurement functions:
    /// `S̃(x) = Σ_{r≠0} B_r·x^r`. The constant coefficient is excluded; it is
    /// state-independent and never enters consensus.
    PolyGaussian {
        basis: Arc<PolynomialBasis>,
        coeffs: DVector<f64>,
    },
}

/// Sufficient statistic for an approximate JLF, optionally carrying the
/// log normalization constant `log C_n = Σ_k log c_k(z_k)`.
#[derive(Debug, Clone)]
pub struct JlfStatistic {
    pub form: JlfForm,
    pub log_norm: Option<f64>,
}

impl JlfStatistic {
    pub fn general(
        phi: Arc<PolynomialBasis>,
        psi: Arc<PolynomialBasis>,
        a_coeffs: DVector<f64>,
        gamma: DVector<f64>,
    ) -> Result<Self, LikelihoodError> {
        if a_coeffs.len() != phi.len() {
            return Err(LikelihoodError::LayoutMismatch {
                expected: phi.len(),
                got: a_coeffs.len(),
            });
        }
        if gamma.len() != psi.len() {
            return Err(LikelihoodError::LayoutMismatch {
                expected: psi.len(),
                got: gamma.len(),
            });
        }
        Ok(Self {
            form: JlfForm::General {
                phi,
                psi,
                a_coeffs,
                gamma,
            },
            log_norm: None,
        })
    }

    /// Builds the polynomial-Gaussian variant from the non-constant
    /// coefficients, aligned with `basis.indices()[1..]`.
    pub fn poly_gaussian(
        basis: Arc<PolynomialBasis>,
        coeffs: DVector<f64>,
    ) -> Result<Self, LikelihoodError> {
        if coeffs.len() + 1 != basis.len() {
            return Err(LikelihoodError::LayoutMismatch {
                expected: basis.len() - 1,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            form: JlfForm::PolyGaussian { basis, coeffs },
            log_norm: None,
        })
    }

    pub fn with_log_norm(mut self, log_norm: f64) -> Self {
        self.log_norm = Some(log_norm);
        self
    }

    /// Number of consensus-carried coefficients.
    pub fn coefficient_len(&self) -> usize {
        match &self.form {
            JlfForm::General { phi, psi, .. } => phi.len() + psi.len(),
            JlfForm::PolyGaussian { coeffs, .. } => coeffs.len(),
        }
    }

    /// Dimension of the state-coordinate subset the statistic ranges over.
    pub fn state_dim(&self) -> usize {
        match &self.form {
            JlfForm::General { phi, .. } => phi.dim(),
            JlfForm::PolyGaussian { basis, .. } => basis.dim(),
        }
    }

    /// Log of the approximate JLF at `x`, up to an x-independent constant.
    pub fn eval_log(&self, x: &[f64]) -> Result<f64, LikelihoodError> {
        match &self.form {
            JlfForm::General {
                phi,
                psi,
                a_coeffs,
                gamma,
            } => {
                let pv = phi.evaluate(x)?;
                let sv = psi.evaluate(x)?;
                Ok(a_coeffs.dot(&pv) - gamma.dot(&sv))
            }
            JlfForm::PolyGaussian { basis, coeffs } => {
                if x.len() != basis.dim() {
                    return Err(LikelihoodError::DimensionMismatch {
                        expected: basis.dim(),
                        got: x.len(),
                    });
                }
                let mono = basis.evaluate(x)?;
                let mut acc = 0.0;
                for (i, &c) in coeffs.iter().enumerate() {
                    acc += c * mono[i + 1];
                }
                Ok(acc)
            }
        }
    }

    /// Batch variant of [`Self::eval_log`]: one value per column of `points`
    /// (points already restricted to the statistic's coordinate subset).
    pub fn eval_log_batch(
        &self,
        points: DMatrixView<'_, f64>,
    ) -> Result<DVector<f64>, LikelihoodError> {
        let dim = self.state_dim();
        if points.nrows() != dim {
            return Err(LikelihoodError::DimensionMismatch {
                expected: dim,
                got: points.nrows(),
            });
        }
        let j = points.ncols();
        let mut out = DVector::zeros(j);
        let mut x = vec![0.0; dim];
        match &self.form {
            JlfForm::General { .. } => {
                for jj in 0..j {
                    for (m, slot) in x.iter_mut().enumerate() {
                        *slot = points[(m, jj)];
                    }
                    out[jj] = self.eval_log(&x)?;
                }
            }
            JlfForm::PolyGaussian { basis, coeffs } => {
                let mut powers = vec![0.0; dim * (basis.degree() as usize + 1)];
                let mut mono = vec![0.0; basis.len()];
                for jj in 0..j {
                    for (m, slot) in x.iter_mut().enumerate() {
                        *slot = points[(m, jj)];
                    }
                    basis.evaluate_into(&x, &mut powers, &mut mono);
                    let mut acc = 0.0;
                    for (i, &c) in coeffs.iter().enumerate() {
                        acc += c * mono[i + 1];
                    }
                    out[jj] = acc;
                }
            }
        }
        Ok(out)
    }
}

/// Exact elementwise sum of per-sensor coefficient vectors. This is the
/// non-consensus reference path ("exact sum calculation").
pub fn sum_coefficients(per_sensor: &[DVector<f64>]) -> Result<DVector<f64>, LikelihoodError> {
    let first = per_sensor.first().ok_or(LikelihoodError::LayoutMismatch {
        expected: 1,
        got: 0,
    })?;
    let mut acc = first.clone();
    for v in &per_sensor[1..] {
        if v.len() != acc.len() {
            return Err(LikelihoodError::LayoutMismatch {
                expected: acc.len(),
                got: v.len(),
            });
        }
        acc += v;
    }
    Ok(acc)
}

/// Sums per-sensor `β` vectors (constant coefficient included) into the
/// polynomial-Gaussian statistic, dropping the irrelevant constant.
pub fn sum_local_statistics_poly(
    basis: &Arc<PolynomialBasis>,
    per_sensor_beta: &[DVector<f64>],
) -> Result<JlfStatistic, LikelihoodError> {
    let total = sum_coefficients(per_sensor_beta)?;
    if total.len() != basis.len() {
        return Err(LikelihoodError::LayoutMismatch {
            expected: basis.len(),
            got: total.len(),
        });
    }
    JlfStatistic::poly_gaussian(basis.clone(), total.rows(1, total.len() - 1).into_owned())
}

/// Sums per-sensor `(A_r, γ_r)` contributions into the general statistic.
pub fn sum_local_statistics_general(
    phi: &Arc<PolynomialBasis>,
    psi: &Arc<PolynomialBasis>,
    per_sensor_a: &[DVector<f64>],
    per_sensor_gamma: &[DVector<f64>],
) -> Result<JlfStatistic, LikelihoodError> {
    let a = sum_coefficients(per_sensor_a)?;
    let gamma = sum_coefficients(per_sensor_gamma)?;
    JlfStatistic::general(phi.clone(), psi.clone(), a, gamma)
}

/// Exact sufficient statistic `t_p = Σ_k η_{k,p}(z_k)` for JLFs that factor
/// through per-sensor summands (Neyman-Fisher structure).
pub fn exact_sufficient_statistic<F>(
    etas: &[F],
    measurements: &[&[f64]],
) -> Result<DVector<f64>, LikelihoodError>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    if etas.len() != measurements.len() {
        return Err(LikelihoodError::LayoutMismatch {
            expected: etas.len(),
            got: measurements.len(),
        });
    }
    let contributions: Vec<DVector<f64>> = etas
        .iter()
        .zip(measurements)
        .map(|(eta, z)| eta(z))
        .collect();
    sum_coefficients(&contributions)
}

/// `log C_n = Σ_k log c_k(z_k)`.
pub fn log_norm_const(per_sensor_log_c: &[f64]) -> f64 {
    per_sensor_log_c.iter().sum()
}
