use nalgebra::DMatrix;

use super::ShrinkageParams;
use crate::error::{Error, Result};
use crate::estimators::{CovStage, CovarianceMatrix};
use crate::linalg;

/// Prior covariance implied by the OLS pseudo-likelihood, `(X'X)^{-1}`,
/// rescaled to the crude estimate's trace.
pub fn prior_cov(design: &DMatrix<f64>, crude: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    linalg::check_full_column_rank(design)?;
    prior_cov_from_gram(&linalg::gram(design), crude)
}

pub fn prior_cov_from_gram(gram: &DMatrix<f64>, crude: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    if gram.nrows() != crude.dim() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns but covariance is {}x{}",
            gram.nrows(),
            crude.dim(),
            crude.dim()
        )));
    }
    let tr_crude = crude.trace();
    if !(tr_crude > 0.0) {
        return Err(Error::DegeneratePrior);
    }
    let g_inv = linalg::spd_inverse(gram)
        .map_err(|_| Error::RankDeficient { tolerance: linalg::RANK_TOLERANCE, fold: None })?;
    let scale = tr_crude / linalg::trace(&g_inv);
    CovarianceMatrix::new(g_inv * scale, CovStage::Prior)
}

/// Orthogonal projection of `crude` onto the matrices sharing the prior's
/// eigenvectors: `U diag(U' C U) U'`.
///
/// When the prior has repeated eigenvalues its eigenbasis is not unique and
/// the projection uses whichever basis the eigensolver returns.
pub fn pca_project(crude: &CovarianceMatrix, prior: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    if crude.dim() != prior.dim() {
        return Err(Error::DimensionMismatch("crude and prior differ in size".into()));
    }
    let u = linalg::symmetric_eigen(prior.entries()).eigenvectors;
    let rotated = u.transpose() * crude.entries() * &u;
    let diag = DMatrix::from_diagonal(&rotated.diagonal());
    let projected = &u * diag * u.transpose();
    CovarianceMatrix::new(linalg::symmetrize(&projected), crude.stage())
}

/// `(1 - kappa) ((1 - mu) C + mu p(C)) + kappa Pi`.
pub fn shrink(crude: &CovarianceMatrix, prior: &CovarianceMatrix, params: ShrinkageParams) -> Result<CovarianceMatrix> {
    let params = ShrinkageParams::new(params.kappa, params.mu)?;
    if crude.dim() != prior.dim() {
        return Err(Error::DimensionMismatch("crude and prior differ in size".into()));
    }
    if params.kappa == 1.0 {
        return Ok(prior.clone().with_stage(CovStage::Shrunk));
    }
    let denoised = if params.mu == 0.0 {
        crude.entries().clone()
    } else {
        let projected = pca_project(crude, prior)?;
        crude.entries() * (1.0 - params.mu) + projected.entries() * params.mu
    };
    let combined =
        if params.kappa == 0.0 { denoised } else { denoised * (1.0 - params.kappa) + prior.entries() * params.kappa };
    CovarianceMatrix::new(combined, CovStage::Shrunk)
}

/// Checks that `argmin_G ||C - G||_F^2 + l ||G - Pi||_F^2` with
/// `l = kappa / (1 - kappa)` equals the convex combination
/// `(1 - kappa) C + kappa Pi`. The minimizer is found by gradient descent.
pub fn verify_shrinkage_argmin(crude: &CovarianceMatrix, prior: &CovarianceMatrix, kappa: f64) -> bool {
    if !(0.0..1.0).contains(&kappa) || crude.dim() != prior.dim() {
        return false;
    }
    let l = kappa / (1.0 - kappa);
    let c = crude.entries();
    let pi = prior.entries();
    let step = 0.5 / (2.0 * (1.0 + l));
    let mut gamma = c.clone();
    for _ in 0..500 {
        let grad = (&gamma - c) * 2.0 + (&gamma - pi) * (2.0 * l);
        let delta = grad * step;
        let moved = delta.norm();
        gamma -= delta;
        if moved <= 1e-16 * gamma.norm().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let convex = c * (1.0 - kappa) + pi * kappa;
    let scale = convex.norm().max(f64::MIN_POSITIVE);
    (&gamma - &convex).norm() <= 1e-6 * scale
}

/// Rescales so that `tr(X'X C_norm) = p`.
pub fn normalize(shrunk: &CovarianceMatrix, design: &DMatrix<f64>) -> Result<CovarianceMatrix> {
    normalize_by_gram(shrunk, &linalg::gram(design))
}

pub fn normalize_by_gram(shrunk: &CovarianceMatrix, gram: &DMatrix<f64>) -> Result<CovarianceMatrix> {
    let p = shrunk.dim();
    if gram.nrows() != p {
        return Err(Error::DimensionMismatch(format!("design has {} columns but covariance is {p}x{p}", gram.nrows())));
    }
    let t = linalg::trace_of_product(gram, shrunk.entries());
    if !(t > 0.0) {
        return Err(Error::DegenerateNormalization(t));
    }
    CovarianceMatrix::new(shrunk.entries() * (p as f64 / t), CovStage::Normalized)
}
