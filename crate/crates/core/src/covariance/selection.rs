use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{block_bootstrap_cov, prior_cov_from_gram, shrink, BootstrapConfig, FoldPlan, ShrinkageParams};
use crate::error::{Error, Result};
use crate::estimators::{CovarianceMatrix, Dataset};
use crate::linalg;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Frobenius,
    /// Symmetrized Kullback-Leibler divergence between zero-mean Gaussians.
    GaussianKl,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(Metric::Frobenius),
            "gaussian_kl" | "kl" => Ok(Metric::GaussianKl),
            other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
        }
    }
}

/// Selected intensities plus the fold-summed score of every grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionOutcome {
    pub selected: ShrinkageParams,
    pub scores: Vec<(ShrinkageParams, f64)>,
}

/// Distance between two covariance matrices. For the Gaussian KL metric a
/// non-PD argument yields `+inf`.
pub fn covariance_distance(a: &DMatrix<f64>, b: &DMatrix<f64>, metric: Metric) -> f64 {
    match metric {
        Metric::Frobenius => (a - b).norm(),
        Metric::GaussianKl => {
            let (Some(ca), Some(cb)) = (a.clone().cholesky(), b.clone().cholesky()) else {
                return f64::INFINITY;
            };
            let p = a.nrows() as f64;
            // 0.5 [tr(B^-1 A) + tr(A^-1 B)] - p; log-determinants cancel
            let d = 0.5 * (linalg::trace(&cb.solve(a)) + linalg::trace(&ca.solve(b))) - p;
            d.max(0.0)
        }
    }
}

/// Out-of-sample choice of `(kappa, mu)` with block-bootstrap crude and
/// held-out estimates.
pub fn select_shrinkage(
    data: &Dataset,
    folds: &FoldPlan,
    grid: &[ShrinkageParams],
    cfg: &BootstrapConfig,
    metric: Metric,
) -> Result<ShrinkageParams> {
    select_shrinkage_detailed(data, folds, grid, cfg, metric).map(|o| o.selected)
}

pub fn select_shrinkage_detailed(
    data: &Dataset,
    folds: &FoldPlan,
    grid: &[ShrinkageParams],
    cfg: &BootstrapConfig,
    metric: Metric,
) -> Result<SelectionOutcome> {
    let crude = |train: &Dataset, w: usize| {
        let c = BootstrapConfig::new(cfg.iterations, cfg.blocks.min(train.n()), derive_seed(cfg.seed, &[w as u64, 0]))?;
        block_bootstrap_cov(train, &c)
    };
    let out = |held: &Dataset, w: usize| {
        let c = BootstrapConfig::new(cfg.iterations, cfg.blocks.min(held.n()), derive_seed(cfg.seed, &[w as u64, 1]))?;
        block_bootstrap_cov(held, &c)
    };
    select_shrinkage_with(data, folds, grid, metric, crude, out)
}

/// Selection with caller-supplied estimators for the in-sample crude
/// covariance and the held-out covariance of fold `w`.
///
/// OLS covariances scale like `1/n`, so both sides are multiplied by their
/// sample size before comparison.
pub fn select_shrinkage_with<F, G>(
    data: &Dataset,
    folds: &FoldPlan,
    grid: &[ShrinkageParams],
    metric: Metric,
    crude_fn: F,
    out_fn: G,
) -> Result<SelectionOutcome>
where
    F: Fn(&Dataset, usize) -> Result<CovarianceMatrix> + Sync,
    G: Fn(&Dataset, usize) -> Result<CovarianceMatrix> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidParameter("shrinkage grid is empty".into()));
    }
    if folds.len() < 2 {
        return Err(Error::InvalidParameter("need at least two folds".into()));
    }
    if folds.n() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "fold plan covers {} rows but dataset has {}",
            folds.n(),
            data.n()
        )));
    }
    let grid: Vec<ShrinkageParams> = grid.iter().map(|g| ShrinkageParams::new(g.kappa, g.mu)).collect::<Result<_>>()?;

    let fold_scores = |w: usize| -> Result<Vec<f64>> {
        let (s, e) = folds.boundaries()[w];
        let train = data.without_rows(s, e)?;
        let held = data.rows(s, e)?;
        let crude = crude_fn(&train, w)?;
        let prior = prior_cov_from_gram(train.gram(), &crude)?;
        let out = out_fn(&held, w)?;
        let target = out.entries() * held.n() as f64;
        if metric == Metric::GaussianKl && target.clone().cholesky().is_none() {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: linalg::symmetric_eigen(&target).eigenvalues.min(),
                trace: linalg::trace(&target),
            });
        }
        let scale = train.n() as f64;
        grid.iter()
            .map(|&params| {
                let shrunk = shrink(&crude, &prior, params)?;
                Ok(covariance_distance(&(shrunk.entries() * scale), &target, metric))
            })
            .collect()
    };

    let per_fold: Vec<Result<Vec<f64>>> = (0..folds.len()).into_par_iter().map(fold_scores).collect();
    let mut totals = vec![0.0; grid.len()];
    for (w, r) in per_fold.into_iter().enumerate() {
        let scores = r.map_err(|e| Error::SelectionFoldFailure { fold: w, source: Box::new(e) })?;
        for (t, s) in totals.iter_mut().zip(scores) {
            *t += s;
        }
    }

    let mut best: Option<(ShrinkageParams, f64)> = None;
    for (&params, &score) in grid.iter().zip(&totals) {
        let better = match best {
            None => true,
            Some((bp, bs)) => score < bs || (score == bs && (params.kappa, params.mu) < (bp.kappa, bp.mu)),
        };
        if better && !score.is_nan() {
            best = Some((params, score));
        }
    }
    let (selected, score) = best.ok_or_else(|| Error::NonFinite("all selection scores are NaN".into()))?;
    if !score.is_finite() {
        return Err(Error::NonFinite("no grid point gives a finite selection score".into()));
    }
    Ok(SelectionOutcome { selected, scores: grid.into_iter().zip(totals).collect() })
}
