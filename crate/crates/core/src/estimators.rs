//! OLS, standard ridge and the two-stage (covariance-aware) ridge family.
//!
//! The two-stage estimator combines the sampling distribution of an
//! underlying estimator `beta_hat ~ N(beta, C)` with a Gaussian prior instead
//! of combining the prior with the OLS pseudo-likelihood. For OLS this gives
//! `(X'X + lambda X'X C)^{-1} X'y`, which reduces to standard ridge when
//! `C` is proportional to `(X'X)^{-1}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// A design matrix with its response, validated for full column rank.
#[derive(Debug, Clone)]
pub struct Dataset {
    design: DMatrix<f64>,
    response: DVector<f64>,
    gram: DMatrix<f64>,
    cross: DVector<f64>,
}

impl Dataset {
    pub fn new(design: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        let (n, p) = design.shape();
        if p == 0 || n < p {
            return Err(Error::DimensionMismatch(format!("need n >= p >= 1, got n = {n}, p = {p}")));
        }
        if response.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "response has length {} but design has {n} rows",
                response.len()
            )));
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset".into()));
        }
        linalg::check_full_column_rank(&design)?;
        let gram = linalg::gram(&design);
        let cross = design.tr_mul(&response);
        Ok(Self { design, response, gram, cross })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    /// `X'X`
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `X'y`
    pub fn cross(&self) -> &DVector<f64> {
        &self.cross
    }

    /// Contiguous row slice `[start, end)`, validated like any dataset.
    pub fn rows(&self, start: usize, end: usize) -> Result<Dataset> {
        let len = end.saturating_sub(start);
        Dataset::new(self.design.rows(start, len).into_owned(), self.response.rows(start, len).into_owned())
    }

    /// Rows outside `[start, end)`, in original order.
    pub fn without_rows(&self, start: usize, end: usize) -> Result<Dataset> {
        let n = self.n();
        let keep: Vec<usize> = (0..start).chain(end..n).collect();
        let design = self.design.select_rows(keep.iter());
        let response = DVector::from_iterator(keep.len(), keep.iter().map(|&i| self.response[i]));
        Dataset::new(design, response)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ols,
    StandardRidge,
    TworegRidge,
    NormalTworeg,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Ols => "ols",
            EstimatorKind::StandardRidge => "standard_ridge",
            EstimatorKind::TworegRidge => "tworeg_ridge",
            EstimatorKind::NormalTworeg => "normal_tworeg",
        }
    }
}

/// A fitted coefficient vector together with how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub values: DVector<f64>,
    pub kind: EstimatorKind,
    pub lambda: f64,
}

impl Coefficients {
    pub fn new(values: DVector<f64>, kind: EstimatorKind, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficients".into()));
        }
        Ok(Self { values, kind, lambda })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovStage {
    Crude,
    Shrunk,
    Normalized,
    Prior,
    TrueKnown,
}

/// Symmetric positive semidefinite `p x p` matrix tagged with the pipeline
/// stage that produced it.
///
/// Construction symmetrizes as `(A + A')/2`; relative asymmetry above `1e-8`
/// is rejected. Eigenvalues in `[-1e-10 tr, 0)` are clamped to zero, anything
/// more negative is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
    stage: CovStage,
}

pub const ASYMMETRY_TOLERANCE: f64 = 1e-8;
pub const PSD_CLAMP_TOLERANCE: f64 = 1e-10;

impl CovarianceMatrix {
    pub fn new(entries: DMatrix<f64>, stage: CovStage) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance".into()));
        }
        let asym = linalg::relative_asymmetry(&entries);
        if asym > ASYMMETRY_TOLERANCE {
            return Err(Error::Asymmetric(asym));
        }
        let sym = if asym == 0.0 { entries } else { linalg::symmetrize(&entries) };
        let eig = linalg::symmetric_eigen(&sym);
        let min = eig.eigenvalues.min();
        if min >= 0.0 {
            return Ok(Self { entries: sym, stage });
        }
        let tr = linalg::trace(&sym);
        if min < -PSD_CLAMP_TOLERANCE * tr.max(0.0) {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min, trace: tr });
        }
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        let v = &eig.eigenvectors;
        let rebuilt = v * DMatrix::from_diagonal(&clamped) * v.transpose();
        Ok(Self { entries: linalg::symmetrize(&rebuilt), stage })
    }

    pub fn identity(p: usize, stage: CovStage) -> Self {
        Self { entries: DMatrix::identity(p, p), stage }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn stage(&self) -> CovStage {
        self.stage
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.entries)
    }

    pub fn with_stage(mut self, stage: CovStage) -> Self {
        self.stage = stage;
        self
    }
}

/// Pseudo observations `(X~, y~)` with `X~'X~ = C^{-1}` and `X~'y~ = C^{-1} beta_hat`.
#[derive(Debug, Clone)]
pub struct PseudoData {
    pub design_tilde: DMatrix<f64>,
    pub response_tilde: DVector<f64>,
}

/// Mean-zero Gaussian prior with precision `lambda * I` (the ridge prior).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrior {
    precision: f64,
}

impl GaussianPrior {
    pub fn ridge(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { precision: lambda })
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidPenalty(lambda))
    }
}

fn check_dim(cov: &CovarianceMatrix, p: usize) -> Result<()> {
    if cov.dim() != p {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {0}x{0} but there are {p} coefficients",
            cov.dim()
        )));
    }
    Ok(())
}

pub fn ols_fit(data: &Dataset) -> Result<Coefficients> {
    let beta = linalg::solve_spd(data.gram(), data.cross())
        .map_err(|_| Error::RankDeficient { tolerance: linalg::RANK_TOLERANCE, fold: None })?;
    Coefficients::new(beta, EstimatorKind::Ols, 0.0)
}

/// Standard ridge: `(X'X + lambda I) beta = X'y`.
pub fn ridge_fit(data: &Dataset, lambda: f64) -> Result<Coefficients> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        let ols = ols_fit(data)?;
        return Coefficients::new(ols.values, EstimatorKind::StandardRidge, 0.0);
    }
    let mut a = data.gram().clone();
    for i in 0..data.p() {
        a[(i, i)] += lambda;
    }
    let beta = linalg::solve_spd(&a, data.cross())?;
    Coefficients::new(beta, EstimatorKind::StandardRidge, lambda)
}

/// Two-stage ridge: `(X'X + lambda X'X C) beta = X'y`, solved directly.
pub fn tworeg_ridge_fit(data: &Dataset, cov: &CovarianceMatrix, lambda: f64) -> Result<Coefficients> {
    check_lambda(lambda)?;
    check_dim(cov, data.p())?;
    if lambda == 0.0 {
        let ols = ols_fit(data)?;
        return Coefficients::new(ols.values, EstimatorKind::TworegRidge, 0.0);
    }
    let g = data.gram();
    let a = g + (g * cov.entries()) * lambda;
    let beta = linalg::solve_general(&a, data.cross()).ok_or(Error::SingularPenaltySystem)?;

    #[cfg(debug_assertions)]
    {
        // factored form (I + lambda C)^{-1} beta_ols
        if let Ok(ols) = ols_fit(data) {
            let m = DMatrix::identity(data.p(), data.p()) + cov.entries() * lambda;
            if let Some(alt) = linalg::solve_general(&m, &ols.values) {
                let scale = beta.norm().max(alt.norm()).max(f64::MIN_POSITIVE);
                debug_assert!(
                    (&beta - &alt).norm() <= 1e-8 * scale.max(1.0),
                    "direct and factored two-stage ridge disagree"
                );
            }
        }
    }

    Coefficients::new(beta, EstimatorKind::TworegRidge, lambda)
}

/// Builds pseudo data from the Cholesky factor `C = L L'`:
/// `X~ = L^{-1}`, `y~ = L^{-1} beta_hat`.
pub fn cholesky_pseudo_data(beta_hat: &Coefficients, cov: &CovarianceMatrix) -> Result<PseudoData> {
    let p = beta_hat.len();
    check_dim(cov, p)?;
    let chol = linalg::cholesky_with_jitter(cov.entries()).ok_or(Error::SingularCovariance)?;
    let l = chol.l();
    let design_tilde = l.solve_lower_triangular(&DMatrix::identity(p, p)).ok_or(Error::SingularCovariance)?;
    let response_tilde = l.solve_lower_triangular(&beta_hat.values).ok_or(Error::SingularCovariance)?;
    if design_tilde.iter().chain(response_tilde.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    Ok(PseudoData { design_tilde, response_tilde })
}

/// Normal 2REG: the maximizer of `p(beta_hat | beta) p(beta)` under
/// `beta_hat | beta ~ N(beta, C)` and the ridge prior, computed as ridge
/// regression on Cholesky pseudo data. Equals `(C^{-1} + lambda I)^{-1} C^{-1} beta_hat`.
pub fn normal_tworeg_fit(
    beta_hat: &Coefficients,
    cov: &CovarianceMatrix,
    prior: &GaussianPrior,
) -> Result<Coefficients> {
    check_dim(cov, beta_hat.len())?;
    let lambda = prior.precision();
    if lambda == 0.0 {
        return Coefficients::new(beta_hat.values.clone(), EstimatorKind::NormalTworeg, 0.0);
    }
    let pseudo = cholesky_pseudo_data(beta_hat, cov)?;
    let xt = &pseudo.design_tilde;
    let mut a = xt.tr_mul(xt);
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let b = xt.tr_mul(&pseudo.response_tilde);
    let beta = linalg::solve_spd(&a, &b)?;
    Coefficients::new(beta, EstimatorKind::NormalTworeg, lambda)
}

/// Exact covariance of `(I + lambda Lambda)^{-1} beta_ols` when `Cov(beta_ols) = C`:
/// `(I + lambda Lambda)^{-1} C (I + lambda Lambda')^{-1}`.
///
/// `penalty` may be any square matrix; it need not be symmetric.
pub fn ridge_estimator_covariance(
    penalty: &DMatrix<f64>,
    ols_cov: &CovarianceMatrix,
    lambda: f64,
) -> Result<CovarianceMatrix> {
    check_lambda(lambda)?;
    let p = ols_cov.dim();
    if penalty.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!(
            "penalty is {}x{} but covariance is {p}x{p}",
            penalty.nrows(),
            penalty.ncols()
        )));
    }
    if lambda == 0.0 {
        return Ok(ols_cov.clone().with_stage(CovStage::TrueKnown));
    }
    let m = DMatrix::identity(p, p) + penalty * lambda;
    let inv = linalg::inverse_general(&m).ok_or(Error::SingularPenaltySystem)?;
    let cov = &inv * ols_cov.entries() * inv.transpose();
    CovarianceMatrix::new(linalg::symmetrize(&cov), CovStage::TrueKnown)
}

/// Whether `Cov(beta_lambda)` decreases monotonically in `lambda` (in the
/// Loewner order), i.e. whether `Lambda' C^{-1} + C^{-1} Lambda` is positive definite.
pub fn monotonicity_criterion(penalty: &DMatrix<f64>, ols_cov: &CovarianceMatrix) -> Result<bool> {
    let p = ols_cov.dim();
    if penalty.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!(
            "penalty is {}x{} but covariance is {p}x{p}",
            penalty.nrows(),
            penalty.ncols()
        )));
    }
    let chol = nalgebra::Cholesky::new(ols_cov.entries().clone()).ok_or(Error::SingularCovariance)?;
    let c_inv = chol.inverse();
    if c_inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    let s = linalg::symmetrize(&(penalty.transpose() * &c_inv + &c_inv * penalty));
    let tr = linalg::trace(&s);
    if !(tr > 0.0) {
        return Ok(false);
    }
    let min = linalg::symmetric_eigen(&s).eigenvalues.min();
    Ok(min > 1e-10 * tr)
}
