use nalgebra::{DMatrix, DVector};

use super::FoldPlan;
use crate::error::{Error, Result};
use crate::estimators::{CovStage, CovarianceMatrix, Dataset};
use crate::linalg;

/// Cross-validated sandwich estimate of `Cov(beta_ols)`:
/// `(X'X)^{-1} (sum_w X_w' e_w e_w' X_w) (X'X)^{-1}` where `e_w` are the
/// residuals of fold `w` under the OLS fit on all other folds.
pub fn cv_hac_cov(data: &Dataset, folds: &FoldPlan) -> Result<CovarianceMatrix> {
    if folds.n() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "fold plan covers {} rows but dataset has {}",
            folds.n(),
            data.n()
        )));
    }
    if folds.len() < 2 {
        return Err(Error::InvalidParameter("need at least two folds".into()));
    }
    let p = data.p();
    let g = data.gram();
    let c = data.cross();
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for (w, &(s, e)) in folds.boundaries().iter().enumerate() {
        let x = data.design().rows(s, e - s);
        let y = data.response().rows(s, e - s);
        let g_out = g - x.tr_mul(&x);
        let c_out = c - x.tr_mul(&y);
        let chol = linalg::gram_factor(&g_out)
            .ok_or(Error::RankDeficient { tolerance: linalg::GRAM_PIVOT_TOLERANCE, fold: Some(w) })?;
        let beta_w = chol.solve(&c_out);
        let resid: DVector<f64> = y - x * &beta_w;
        let score = x.tr_mul(&resid);
        meat.ger(1.0, &score, &score, 1.0);
    }
    let g_inv = linalg::spd_inverse(g)?;
    let cov = &g_inv * meat * &g_inv;
    CovarianceMatrix::new(linalg::symmetrize(&cov), CovStage::Crude)
}
