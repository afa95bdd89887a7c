//! Multivariate monomial bases and least-squares fitting.
//!
//! A basis is described by a set of multi-indices `r = (r_1 … r_M)`; the
//! associated basis function is the monomial `x ↦ Π_m x_m^{r_m}`. Bases are
//! truncated by total degree and ordered graded-lexicographically, which fixes
//! a deterministic coefficient layout shared by every sensor in a network.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use nalgebra::{DMatrix, DMatrixView, DVector};

#[allow(unused_imports)]
use num_traits::Float as _;

/// Errors produced by basis construction and fitting.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BasisError {
    #[error("state dimension must be at least 1")]
    EmptyDimension,
    #[error("basis index count C({0}+{1}, {1}) overflows the address space")]
    CountOverflow(u32, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("least-squares fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("design matrix is numerically rank-deficient and the ridge fallback is disabled")]
    RankDeficient,
}

/// Exponent tuple of one multivariate monomial.
///
/// Ordering is graded lexicographic: first by total degree, then by
/// lexicographic comparison of the exponent tuples. This is a total order,
/// so any two sensors enumerate a basis in the same sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self { exponents }
    }

    /// Number of variables.
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Total degree `Σ_m r_m`.
    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// Componentwise sum of two indices; total degrees add.
    pub fn checked_add(&self, other: &MultiIndex) -> Result<MultiIndex, BasisError> {
        if self.dim() != other.dim() {
            return Err(BasisError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(MultiIndex::new(
            self.exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    /// Monomial value `Π_m x_m^{r_m}`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.exponents
            .iter()
            .zip(x)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.exponents.cmp(&other.exponents))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.exponents.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Number of multi-indices of dimension `m` with total degree at most `r`,
/// i.e. the binomial coefficient C(r+m, m).
pub fn multi_index_count(m: usize, r: u32) -> Result<usize, BasisError> {
    if m == 0 {
        return Err(BasisError::EmptyDimension);
    }
    // C(r+m, m) = Π_{i=1..m} (r+i)/i, kept exact by dividing as we go.
    let mut count: u128 = 1;
    for i in 1..=m as u128 {
        count = count
            .checked_mul(r as u128 + i)
            .ok_or(BasisError::CountOverflow(r, m))?
            / i;
    }
    usize::try_from(count).map_err(|_| BasisError::CountOverflow(r, m))
}

/// All multi-indices of dimension `m` with total degree at most `r`, in
/// graded lexicographic order. The count is `C(r+m, m)`.
pub fn enumerate_multi_indices(m: usize, r: u32) -> Result<Vec<MultiIndex>, BasisError> {
    let count = multi_index_count(m, r)?;
    let mut out = Vec::with_capacity(count);
    let mut current = vec![0u32; m];
    for degree in 0..=r {
        fill_compositions(&mut current, 0, degree, &mut out);
    }
    debug_assert_eq!(out.len(), count);
    Ok(out)
}

/// Appends all exponent tuples of `current[pos..]` summing to `remaining`,
/// in ascending lexicographic order.
fn fill_compositions(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(MultiIndex::new(current.to_vec()));
        return;
    }
    for e in 0..=remaining {
        current[pos] = e;
        fill_compositions(current, pos + 1, remaining - e, out);
    }
}

/// A truncated multivariate monomial basis.
///
/// Holds all multi-indices of total degree at most `degree` over `dim`
/// variables, sorted graded-lexicographically. The constant monomial is
/// always the first entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialBasis {
    dim: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
    /// Exponents flattened row-per-index for cache-friendly evaluation.
    flat: Vec<u32>,
}

impl PolynomialBasis {
    pub fn new(dim: usize, degree: u32) -> Result<Self, BasisError> {
        let indices = enumerate_multi_indices(dim, degree)?;
        let mut flat = Vec::with_capacity(indices.len() * dim);
        for idx in &indices {
            flat.extend_from_slice(idx.exponents());
        }
        Ok(Self {
            dim,
            degree,
            indices,
            flat,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Position of `index` in this basis, or `None` if it is not a member.
    pub fn position_of(&self, index: &MultiIndex) -> Option<usize> {
        if index.dim() != self.dim {
            return None;
        }
        self.indices.binary_search(index).ok()
    }

    /// Evaluates every basis function at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<f64>, BasisError> {
        if x.len() != self.dim {
            return Err(BasisError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut powers = vec![0.0; self.dim * (self.degree as usize + 1)];
        let mut out = DVector::zeros(self.len());
        self.evaluate_into(x, &mut powers, out.as_mut_slice());
        Ok(out)
    }

    /// Evaluation core used by the batch paths. `powers` must have room for
    /// `dim * (degree + 1)` entries; `out` must have `len()` entries.
    pub(crate) fn evaluate_into(&self, x: &[f64], powers: &mut [f64], out: &mut [f64]) {
        let stride = self.degree as usize + 1;
        for (m, &v) in x.iter().enumerate() {
            let row = &mut powers[m * stride..(m + 1) * stride];
            let mut p = 1.0;
            for slot in row.iter_mut() {
                *slot = p;
                p *= v;
            }
        }
        for (i, slot) in out.iter_mut().enumerate() {
            let exps = &self.flat[i * self.dim..(i + 1) * self.dim];
            let mut prod = 1.0;
            for (m, &e) in exps.iter().enumerate() {
                prod *= powers[m * stride + e as usize];
            }
            *slot = prod;
        }
    }

    /// Design matrix with one row per point (points are columns of `points`).
    pub fn design_matrix(&self, points: DMatrixView<'_, f64>) -> Result<DMatrix<f64>, BasisError> {
        if points.nrows() != self.dim {
            return Err(BasisError::DimensionMismatch {
                expected: self.dim,
                got: points.nrows(),
            });
        }
        let j = points.ncols();
        let mut phi = DMatrix::zeros(j, self.len());
        let mut powers = vec![0.0; self.dim * (self.degree as usize + 1)];
        let mut row = vec![0.0; self.len()];
        let mut point = vec![0.0; self.dim];
        for jj in 0..j {
            for (m, slot) in point.iter_mut().enumerate() {
                *slot = points[(m, jj)];
            }
            self.evaluate_into(&point, &mut powers, &mut row);
            for (r, &v) in row.iter().enumerate() {
                phi[(jj, r)] = v;
            }
        }
        Ok(phi)
    }
}

/// Options controlling the least-squares solve.
#[derive(Debug, Clone)]
pub struct LsOptions {
    /// When the design matrix is numerically rank-deficient, fall back to a
    /// ridge-regularized solve with `λ = 1e-9 · trace(ΦᵀΦ)/R_a` instead of
    /// returning [`BasisError::RankDeficient`].
    pub ridge_fallback: bool,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self {
            ridge_fallback: true,
        }
    }
}

/// Coefficients of a function expanded on a polynomial basis.
///
/// `coeffs` has one row per basis function and `q` columns, where `q` is the
/// codomain dimension of the expanded function.
#[derive(Debug, Clone)]
pub struct BasisExpansion {
    basis: Arc<PolynomialBasis>,
    coeffs: DMatrix<f64>,
}

impl BasisExpansion {
    pub fn new(basis: Arc<PolynomialBasis>, coeffs: DMatrix<f64>) -> Result<Self, BasisError> {
        if coeffs.nrows() != basis.len() {
            return Err(BasisError::DimensionMismatch {
                expected: basis.len(),
                got: coeffs.nrows(),
            });
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &Arc<PolynomialBasis> {
        &self.basis
    }

    /// One row per basis function, `q` columns.
    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// Codomain dimension of the expanded function.
    pub fn codomain_dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Value of the expansion at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<f64>, BasisError> {
        let phi = self.basis.evaluate(x)?;
        Ok(self.coeffs.transpose() * phi)
    }
}

/// Least-squares fit of a vector-valued function onto a basis.
///
/// `points` holds `J` fitting points as columns, `targets` the corresponding
/// function values as rows (J×q). Returns the coefficient matrix minimizing
/// `Σ_j ‖ã(x⁽ʲ⁾) − a(x⁽ʲ⁾)‖²`, computed through a Householder QR of the
/// design matrix rather than explicit inversion of the normal equations.
pub fn ls_fit(
    basis: &Arc<PolynomialBasis>,
    points: DMatrixView<'_, f64>,
    targets: DMatrixView<'_, f64>,
    opts: &LsOptions,
) -> Result<BasisExpansion, BasisError> {
    let j = points.ncols();
    let n_basis = basis.len();
    if targets.nrows() != j {
        return Err(BasisError::DimensionMismatch {
            expected: j,
            got: targets.nrows(),
        });
    }
    if j < n_basis {
        return Err(BasisError::TooFewPoints {
            needed: n_basis,
            got: j,
        });
    }
    let phi = basis.design_matrix(points)?;
    let coeffs = solve_ls(phi, targets, opts)?;
    BasisExpansion::new(basis.clone(), coeffs)
}

fn solve_ls(
    phi: DMatrix<f64>,
    targets: DMatrixView<'_, f64>,
    opts: &LsOptions,
) -> Result<DMatrix<f64>, BasisError> {
    let j = phi.nrows();
    let n = phi.ncols();
    let gram_trace: f64 = phi.iter().map(|v| v * v).sum();
    let qr = phi.clone().qr();
    let r = qr.r();
    let diag_max = (0..n).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    let tol = f64::EPSILON * diag_max * j.max(n) as f64;
    let deficient = (0..n).any(|i| r[(i, i)].abs() <= tol);
    if !deficient {
        let mut rhs = targets.clone_owned();
        qr.q_tr_mul(&mut rhs);
        let mut coeffs = rhs.rows(0, n).clone_owned();
        if !r.solve_upper_triangular_mut(&mut coeffs) {
            return Err(BasisError::RankDeficient);
        }
        return Ok(coeffs);
    }
    if !opts.ridge_fallback {
        return Err(BasisError::RankDeficient);
    }
    // Ridge fallback: solve (ΦᵀΦ + λI) C = Φᵀ A with λ tied to the Gram trace.
    let lambda = 1e-9 * gram_trace / n as f64;
    let mut gram = phi.transpose() * &phi;
    for i in 0..n {
        gram[(i, i)] += lambda;
    }
    let rhs = phi.transpose() * targets;
    gram.cholesky()
        .map(|chol| chol.solve(&rhs))
        .ok_or(BasisError::RankDeficient)
}
