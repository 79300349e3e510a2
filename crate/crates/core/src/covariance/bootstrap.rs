use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::{BootstrapConfig, FoldPlan};
use crate::error::{Error, Result};
use crate::estimators::{CovStage, CovarianceMatrix, Dataset};
use crate::linalg;
use crate::rng::substream;

/// Per-block sufficient statistics `X_b'X_b`, `X_b'y_b`. OLS on a
/// concatenation of blocks only needs the sums of these.
struct BlockMoments {
    grams: Vec<DMatrix<f64>>,
    crosses: Vec<DVector<f64>>,
}

impl BlockMoments {
    fn new(data: &Dataset, plan: &FoldPlan) -> Self {
        let (grams, crosses) = plan
            .boundaries()
            .iter()
            .map(|&(s, e)| {
                let x = data.design().rows(s, e - s);
                let y = data.response().rows(s, e - s);
                (x.tr_mul(&x), x.tr_mul(&y))
            })
            .unzip();
        Self { grams, crosses }
    }
}

/// Non-overlapping block bootstrap of the OLS coefficient covariance.
///
/// Each replicate draws `blocks` block indices uniformly with replacement and
/// refits OLS on the concatenation; the result is the sample covariance of
/// the replicate estimates. Replicate `b`, attempt `k` draws from substream
/// `(seed, b, k)`, so the output does not depend on the worker count.
/// Rank-deficient resamples are redrawn, up to `10 * iterations` redraws in total.
pub fn block_bootstrap_cov(data: &Dataset, cfg: &BootstrapConfig) -> Result<CovarianceMatrix> {
    cfg.check_for(data.n())?;
    let plan = FoldPlan::contiguous(data.n(), cfg.blocks)?;
    let moments = BlockMoments::new(data, &plan);
    let p = data.p();
    let omega = cfg.blocks;
    let max_redraws = 10 * cfg.iterations;

    let replicate = |b: usize| -> Option<(DVector<f64>, usize)> {
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut cross = DVector::<f64>::zeros(p);
        for attempt in 0..=max_redraws {
            let mut rng = substream(cfg.seed, &[b as u64, attempt as u64]);
            gram.fill(0.0);
            cross.fill(0.0);
            for _ in 0..omega {
                let k = rng.random_range(0..omega);
                gram += &moments.grams[k];
                cross += &moments.crosses[k];
            }
            if let Some(chol) = linalg::gram_factor(&gram) {
                return Some((chol.solve(&cross), attempt));
            }
        }
        None
    };

    let draws: Vec<Option<(DVector<f64>, usize)>> =
        (0..cfg.iterations).into_par_iter().with_min_len(32).map(replicate).collect();

    let mut betas = Vec::with_capacity(cfg.iterations);
    let mut redraws = 0usize;
    for d in draws {
        match d {
            Some((beta, attempts)) => {
                redraws += attempts;
                betas.push(beta);
            }
            None => return Err(Error::BootstrapDegenerate { redraws: redraws + max_redraws }),
        }
    }
    if redraws > max_redraws {
        return Err(Error::BootstrapDegenerate { redraws });
    }
    CovarianceMatrix::new(sample_covariance(&betas), CovStage::Crude)
}

/// Unbiased sample covariance, reduced in input order.
pub(crate) fn sample_covariance(samples: &[DVector<f64>]) -> DMatrix<f64> {
    let m = samples.len();
    let p = samples[0].len();
    let mut mean = DVector::<f64>::zeros(p);
    for s in samples {
        mean += s;
    }
    mean /= m as f64;
    let mut acc = DMatrix::<f64>::zeros(p, p);
    for s in samples {
        let d = s - &mean;
        acc.ger(1.0, &d, &d, 1.0);
    }
    acc / (m as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::random_dataset;
    use rand::SeedableRng;

    #[test]
    fn single_block_single_observation_is_zero() {
        let d = Dataset::new(DMatrix::from_element(1, 1, 2.0), DVector::from_element(1, 3.0)).unwrap();
        let cfg = BootstrapConfig::new(20, 1, 9).unwrap();
        let c = block_bootstrap_cov(&d, &cfg).unwrap();
        assert_eq!(c.entries(), &DMatrix::zeros(1, 1));
        assert_eq!(c.stage(), CovStage::Crude);
    }

    #[test]
    fn seeded_determinism() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let (d, _) = random_dataset(&mut rng, 200, 3, None, 1.0);
        let cfg = BootstrapConfig::new(100, 10, 42).unwrap();
        let a = block_bootstrap_cov(&d, &cfg).unwrap();
        let b = block_bootstrap_cov(&d, &cfg).unwrap();
        assert_eq!(a, b);
        let c = block_bootstrap_cov(&d, &BootstrapConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (d, _) = random_dataset(&mut rng, 300, 4, None, 1.0);
        let cfg = BootstrapConfig::new(300, 15, 5).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| block_bootstrap_cov(&d, &cfg).unwrap());
        let b = four.install(|| block_bootstrap_cov(&d, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn matches_explicit_concatenation() {
        // replicate 0 rebuilt by literally concatenating the drawn blocks
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (d, _) = random_dataset(&mut rng, 23, 2, None, 1.0);
        let cfg = BootstrapConfig::new(2, 4, 17).unwrap();
        let plan = FoldPlan::contiguous(23, 4).unwrap();
        let mut draw = substream(17, &[0, 0]);
        let picks: Vec<usize> = (0..4).map(|_| draw.random_range(0..4)).collect();
        let rows: Vec<usize> = picks
            .iter()
            .flat_map(|&k| {
                let (s, e) = plan.boundaries()[k];
                s..e
            })
            .collect();
        let x = d.design().select_rows(rows.iter());
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| d.response()[i]));
        let explicit = Dataset::new(x, y).and_then(|r| crate::estimators::ols_fit(&r));
        let moments = BlockMoments::new(&d, &plan);
        let mut g = DMatrix::zeros(2, 2);
        let mut c = DVector::zeros(2);
        for &k in &picks {
            g += &moments.grams[k];
            c += &moments.crosses[k];
        }
        let via_moments = linalg::solve_spd(&g, &c).unwrap();
        let explicit = explicit.unwrap().values;
        assert!((&explicit - &via_moments).norm() < 1e-10 * explicit.norm());
        assert!(block_bootstrap_cov(&d, &cfg).is_ok());
    }

    #[test]
    fn rank_deficient_resamples_are_redrawn() {
        // second column is only nonzero in the last block
        let n = 40;
        let x = DMatrix::from_fn(n, 2, |i, j| {
            if j == 0 {
                1.0 + (i % 3) as f64
            } else if i >= 30 {
                (i as f64).sin()
            } else {
                0.0
            }
        });
        let y = DVector::from_fn(n, |i, _| (i as f64 * 0.37).cos());
        let d = Dataset::new(x, y).unwrap();
        let cfg = BootstrapConfig::new(200, 4, 1).unwrap();
        let c = block_bootstrap_cov(&d, &cfg).unwrap();
        assert!(c.entries().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn hopeless_resampling_is_degenerate() {
        // each block spans one coordinate only: only permutations are full rank
        let p = 8;
        let x = DMatrix::from_fn(p * 3, p, |i, j| if i / 3 == j { 1.0 + i as f64 } else { 0.0 });
        let y = DVector::from_fn(p * 3, |i, _| i as f64);
        let d = Dataset::new(x, y).unwrap();
        let cfg = BootstrapConfig::new(2, p, 1).unwrap();
        assert!(matches!(block_bootstrap_cov(&d, &cfg), Err(Error::BootstrapDegenerate { .. })));
    }

    #[test]
    fn sample_covariance_small_case() {
        let s = vec![
            DVector::from_column_slice(&[1.0, 2.0]),
            DVector::from_column_slice(&[3.0, 2.0]),
            DVector::from_column_slice(&[2.0, 5.0]),
        ];
        let c = sample_covariance(&s);
        assert!((c[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((c[(1, 1)] - 3.0).abs() < 1e-15);
        assert!((c[(0, 1)] - 0.0).abs() < 1e-15);
    }
}
