use rayon::prelude::*;
use serde::Serialize;

use super::dgp::{gen_dataset, DgpConfig, Study};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Gaussian fourth moment `E[X^4]`.
pub const GAUSSIAN_FOURTH_MOMENT: f64 = 3.0;

/// Closed-form limit of `n Var(beta_1_ols)` for the three study shapes,
/// with a unit-variance Gaussian first covariate.
pub fn analytic_limit(cfg: &DgpConfig) -> Result<f64> {
    analytic_limit_with_moment(cfg, GAUSSIAN_FOURTH_MOMENT)
}

/// As [`analytic_limit`] with an explicit `E[X_1^4]` for the aligned effect.
pub fn analytic_limit_with_moment(cfg: &DgpConfig, fourth_moment: f64) -> Result<f64> {
    cfg.validate()?;
    let s2 = cfg.noise_var();
    match cfg.study {
        Study::Autocorrelation => {
            let a = cfg.pi * cfg.rho;
            Ok(s2 * (1.0 + a) / (1.0 - a))
        }
        Study::RandomEffectAligned | Study::RandomEffectUnaligned if cfg.pi != 0.0 || cfg.rho != 0.0 => {
            Err(Error::UnsupportedConfig("random effect limits assume no covariate or noise autocorrelation".into()))
        }
        Study::RandomEffectAligned => Ok(s2 + cfg.effect_var * (fourth_moment + 2.0 * cfg.tau / (1.0 - cfg.tau))),
        Study::RandomEffectUnaligned => Ok(s2 + cfg.effect_var),
    }
}

/// Monte Carlo estimates of `n Var(beta_1_ols)` at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NVarEstimate {
    pub n: usize,
    /// `n` times the sample variance of `beta_hat_1 - beta_1`.
    pub direct: f64,
    pub direct_se: f64,
    /// `n` times the mean of the conditional variance `X'Sigma X / (X'X)^2`.
    /// Unbiased for the same quantity because the noise has conditional mean zero.
    pub conditional: f64,
    pub conditional_se: f64,
    pub replicates: usize,
}

/// Brute-force `n Var(beta_ols)` for univariate configurations.
pub fn empirical_nvar(cfg: &DgpConfig, n_list: &[usize], replicates: usize) -> Result<Vec<NVarEstimate>> {
    if cfg.p != 1 {
        return Err(Error::UnsupportedConfig(format!("n Var estimates need a single covariate, got p = {}", cfg.p)));
    }
    if replicates < 2 {
        return Err(Error::InvalidParameter("need at least 2 replicates".into()));
    }
    n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let base = DgpConfig { n, fixed_beta: Some(vec![0.0]), ..cfg.clone() };
            base.validate()?;
            let draws: Vec<Result<(f64, f64)>> = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let rep = gen_dataset(&base.with_seed(derive_seed(cfg.seed, &[k as u64, r as u64])))?;
                    let est = rep.data.cross()[0] / rep.data.gram()[(0, 0)];
                    Ok((est, rep.true_cov.entries()[(0, 0)]))
                })
                .collect();
            let draws: Vec<(f64, f64)> = draws.into_iter().collect::<Result<_>>()?;
            let m = replicates as f64;
            let nf = n as f64;
            let mean = draws.iter().map(|d| d.0).sum::<f64>() / m;
            let dev2: Vec<f64> = draws.iter().map(|d| (d.0 - mean).powi(2)).collect();
            let var = dev2.iter().sum::<f64>() / (m - 1.0);
            // delta-method SE of the sample variance via the fourth central moment
            let m4 = dev2.iter().map(|d| d * d).sum::<f64>() / m;
            let var_se = ((m4 - var * var * (m - 3.0) / (m - 1.0)) / m).max(0.0).sqrt();
            let cond: Vec<f64> = draws.iter().map(|d| d.1 * nf).collect();
            let cmean = cond.iter().sum::<f64>() / m;
            let csd = (cond.iter().map(|c| (c - cmean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
            Ok(NVarEstimate {
                n,
                direct: nf * var,
                direct_se: nf * var_se,
                conditional: cmean,
                conditional_se: csd / m.sqrt(),
                replicates,
            })
        })
        .collect()
}
