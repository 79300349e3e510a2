//! Estimating `Cov(beta_ols)` in three steps: a crude estimate (block
//! bootstrap or cross-validated sandwich), shrinkage toward the prior implied
//! by the OLS pseudo-likelihood, and trace normalization. The shrinkage
//! intensities are chosen by out-of-sample resampling.

mod bootstrap;
mod hac;
mod selection;
mod shrinkage;

pub use bootstrap::block_bootstrap_cov;
pub use hac::cv_hac_cov;
pub use selection::{
    covariance_distance, select_shrinkage, select_shrinkage_detailed, select_shrinkage_with, Metric, SelectionOutcome,
};
pub use shrinkage::{
    normalize, normalize_by_gram, pca_project, prior_cov, prior_cov_from_gram, shrink, verify_shrinkage_argmin,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shrinkage intensities: `kappa` toward the prior, `mu` toward the prior's
/// eigenbasis-diagonal projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageParams {
    pub kappa: f64,
    pub mu: f64,
}

impl ShrinkageParams {
    pub fn new(kappa: f64, mu: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("mu", mu)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { kappa, mu })
    }

    pub const NONE: ShrinkageParams = ShrinkageParams { kappa: 0.0, mu: 0.0 };

    /// The 6x6 grid `{0, 0.2, ..., 1}^2`, ordered by kappa then mu.
    pub fn default_grid() -> Vec<ShrinkageParams> {
        let levels = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        levels.iter().flat_map(|&kappa| levels.iter().map(move |&mu| ShrinkageParams { kappa, mu })).collect()
    }

    /// Diagonal pairs `mu = kappa` in `{0, 0.2, ..., 0.8}`.
    pub fn diagonal_grid() -> Vec<ShrinkageParams> {
        [0.0, 0.2, 0.4, 0.6, 0.8].iter().map(|&v| ShrinkageParams { kappa: v, mu: v }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub blocks: usize,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(iterations: usize, blocks: usize, seed: u64) -> Result<Self> {
        if iterations < 2 {
            return Err(Error::InvalidParameter(format!("bootstrap needs at least 2 iterations, got {iterations}")));
        }
        if blocks == 0 {
            return Err(Error::InvalidParameter("bootstrap needs at least one block".into()));
        }
        Ok(Self { iterations, blocks, seed })
    }

    pub(crate) fn check_for(&self, n: usize) -> Result<()> {
        Self::new(self.iterations, self.blocks, self.seed)?;
        if self.blocks > n {
            return Err(Error::InvalidParameter(format!("{} blocks requested for {n} observations", self.blocks)));
        }
        Ok(())
    }
}

/// Contiguous partition of `[0, n)` into ranges whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    boundaries: Vec<(usize, usize)>,
}

impl FoldPlan {
    /// `folds` contiguous ranges; the first `n mod folds` get one extra row.
    pub fn contiguous(n: usize, folds: usize) -> Result<Self> {
        if folds == 0 || folds > n {
            return Err(Error::InvalidParameter(format!("cannot split {n} observations into {folds} folds")));
        }
        let base = n / folds;
        let extra = n % folds;
        let mut start = 0;
        let boundaries = (0..folds)
            .map(|k| {
                let len = base + usize::from(k < extra);
                let range = (start, start + len);
                start += len;
                range
            })
            .collect();
        Ok(Self { boundaries })
    }

    pub fn from_boundaries(n: usize, boundaries: Vec<(usize, usize)>) -> Result<Self> {
        let mut expect = 0;
        for &(s, e) in &boundaries {
            if s != expect || e <= s {
                return Err(Error::InvalidParameter("fold ranges must be nonempty, contiguous and ordered".into()));
            }
            expect = e;
        }
        if expect != n || boundaries.is_empty() {
            return Err(Error::InvalidParameter(format!("folds do not cover [0, {n})")));
        }
        let sizes = boundaries.iter().map(|(s, e)| e - s);
        let (lo, hi) = sizes.fold((usize::MAX, 0), |(lo, hi), s| (lo.min(s), hi.max(s)));
        if hi - lo > 1 {
            return Err(Error::InvalidParameter("fold sizes differ by more than one".into()));
        }
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[(usize, usize)] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    pub fn n(&self) -> usize {
        self.boundaries.last().map_or(0, |b| b.1)
    }
}
