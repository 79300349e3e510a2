use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CovStage, CovarianceMatrix, Dataset};
use crate::linalg;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// AR(pi) first covariate with AR(rho) noise.
    Autocorrelation,
    /// Extra noise `X_1 * b` with `b` AR(tau).
    RandomEffectAligned,
    /// Extra noise `Z * b` with `Z` an independent standard normal series.
    RandomEffectUnaligned,
}

impl Study {
    pub fn as_str(&self) -> &'static str {
        match self {
            Study::Autocorrelation => "autocorrelation",
            Study::RandomEffectAligned => "random_effect_aligned",
            Study::RandomEffectUnaligned => "random_effect_unaligned",
        }
    }
}

impl std::str::FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "autocorrelation" => Ok(Study::Autocorrelation),
            "random_effect_aligned" | "random_effect" => Ok(Study::RandomEffectAligned),
            "random_effect_unaligned" => Ok(Study::RandomEffectUnaligned),
            other => Err(Error::InvalidParameter(format!("unknown study {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub p: usize,
    pub pi: f64,
    pub rho: f64,
    pub tau: f64,
    /// Noise variance is `sigma2 * p`.
    pub sigma2: f64,
    pub effect_var: f64,
    pub study: Study,
    pub seed: u64,
    /// Coefficients held fixed across replicates; drawn i.i.d. N(0, 1) when absent.
    pub fixed_beta: Option<Vec<f64>>,
}

impl DgpConfig {
    /// First study: `pi = rho = exp(-1/10)`, `p = 10`, `n = 2000`.
    pub fn autocorrelation(sigma2: f64, seed: u64) -> Self {
        let lifetime10 = (-0.1f64).exp();
        Self {
            n: 2000,
            p: 10,
            pi: lifetime10,
            rho: lifetime10,
            tau: 0.0,
            sigma2,
            effect_var: 0.0,
            study: Study::Autocorrelation,
            seed,
            fixed_beta: None,
        }
    }

    /// Second study: `tau = exp(-1/100)`, `Var(b) = 5`, `sigma2 = 0.5`.
    pub fn random_effect(seed: u64) -> Self {
        Self {
            n: 2000,
            p: 10,
            pi: 0.0,
            rho: 0.0,
            tau: (-0.01f64).exp(),
            sigma2: 0.5,
            effect_var: 5.0,
            study: Study::RandomEffectAligned,
            seed,
            fixed_beta: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pi", self.pi), ("rho", self.rho), ("tau", self.tau)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.effect_var >= 0.0) || !self.effect_var.is_finite() {
            return Err(Error::InvalidParameter(format!("effect_var must be nonnegative, got {}", self.effect_var)));
        }
        if self.p == 0 || self.n < self.p {
            return Err(Error::InvalidParameter(format!("need n >= p >= 1, got n = {}, p = {}", self.n, self.p)));
        }
        if let Some(b) = &self.fixed_beta {
            if b.len() != self.p || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("fixed_beta needs {} finite entries", self.p)));
            }
        }
        Ok(())
    }

    pub fn noise_var(&self) -> f64 {
        self.sigma2 * self.p as f64
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// One draw from the data generating process.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub data: Dataset,
    pub beta: DVector<f64>,
    /// `Cov(beta_ols | X, W)` under the known noise covariance.
    pub true_cov: CovarianceMatrix,
}

/// Stationary Gaussian AR(1) path with covariance `marginal_var * coeff^|i-j|`.
///
/// Panics if `coeff` is outside `[0, 1)` or `marginal_var` is negative.
pub fn gen_ar1<R: Rng>(length: usize, coeff: f64, marginal_var: f64, rng: &mut R) -> DVector<f64> {
    assert!((0.0..1.0).contains(&coeff), "AR coefficient must lie in [0, 1)");
    assert!(marginal_var >= 0.0, "marginal variance must be nonnegative");
    let sd = marginal_var.sqrt();
    let innov = (1.0 - coeff * coeff).sqrt() * sd;
    let mut out = DVector::zeros(length);
    let mut prev = 0.0;
    for i in 0..length {
        let z: f64 = StandardNormal.sample(rng);
        prev = if i == 0 { sd * z } else { coeff * prev + innov * z };
        out[i] = prev;
    }
    out
}

/// `R v` where `R_ij = a^|i-j|`, in linear time via a forward and a backward pass.
pub fn ar_kernel_apply(a: f64, v: &DVector<f64>) -> DVector<f64> {
    if a == 0.0 {
        return v.clone();
    }
    let n = v.len();
    let mut fwd = DVector::zeros(n);
    let mut acc = 0.0;
    for i in 0..n {
        acc = v[i] + a * acc;
        fwd[i] = acc;
    }
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc = v[i] + a * acc;
        fwd[i] += acc - v[i];
    }
    fwd
}

/// `X' Sigma X` for `Sigma = noise_var R_rho + effect_var D_w R_tau D_w`.
pub(crate) fn sandwich_meat(
    x: &DMatrix<f64>,
    noise_var: f64,
    rho: f64,
    effect: Option<(&DVector<f64>, f64, f64)>,
) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut sx = DMatrix::zeros(n, p);
    for k in 0..p {
        let col = x.column(k).into_owned();
        let mut s = ar_kernel_apply(rho, &col) * noise_var;
        if let Some((w, tau, var)) = effect {
            if var > 0.0 {
                let weighted = col.component_mul(w);
                s += ar_kernel_apply(tau, &weighted).component_mul(w) * var;
            }
        }
        sx.set_column(k, &s);
    }
    linalg::symmetrize(&x.tr_mul(&sx))
}

/// Draws a dataset, its coefficients and the conditional OLS covariance.
pub fn gen_dataset(cfg: &DgpConfig) -> Result<Replicate> {
    cfg.validate()?;
    let (n, p) = (cfg.n, cfg.p);
    let mut rng = substream(cfg.seed, &[]);
    let beta = match &cfg.fixed_beta {
        Some(b) => DVector::from_column_slice(b),
        None => DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng)),
    };
    let mut x = DMatrix::zeros(n, p);
    x.set_column(0, &gen_ar1(n, cfg.pi, 1.0, &mut rng));
    for k in 1..p {
        x.set_column(k, &DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)));
    }
    let noise_var = cfg.noise_var();
    let mut noise = gen_ar1(n, cfg.rho, noise_var, &mut rng);

    let carrier = match cfg.study {
        Study::Autocorrelation => None,
        Study::RandomEffectAligned => Some(x.column(0).into_owned()),
        Study::RandomEffectUnaligned => Some(DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))),
    };
    if let Some(w) = &carrier {
        let b = gen_ar1(n, cfg.tau, cfg.effect_var, &mut rng);
        noise += w.component_mul(&b);
    }

    let y = &x * &beta + noise;
    let data = Dataset::new(x, y)?;
    let effect = carrier.as_ref().map(|w| (w, cfg.tau, cfg.effect_var));
    let meat = sandwich_meat(data.design(), noise_var, cfg.rho, effect);
    let g_inv = linalg::spd_inverse(data.gram())?;
    let cov = linalg::symmetrize(&(&g_inv * meat * &g_inv));
    let true_cov = CovarianceMatrix::new(cov, CovStage::TrueKnown)?;
    Ok(Replicate { data, beta, true_cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn lag_autocorr(x: &DVector<f64>, k: usize) -> f64 {
        let n = x.len();
        let m = x.mean();
        let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
        let cov: f64 = (0..n - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>() / n as f64;
        cov / var
    }

    #[test]
    fn ar1_white_noise_and_autocorrelation() {
        let n = 100_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
        let w = gen_ar1(n, 0.0, 2.0, &mut rng);
        assert!(lag_autocorr(&w, 1).abs() < 3.0 / (n as f64).sqrt());
        // var of sample variance for Gaussian: 2 s^4 / n
        let m = w.mean();
        let v = w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((v - 2.0).abs() < 3.0 * 2.0 * (2.0 / n as f64).sqrt());

        let a = (-0.1f64).exp();
        let x = gen_ar1(n, a, 1.0, &mut rng);
        for k in 1..=5 {
            let target = a.powi(k as i32);
            // Bartlett: Var(r_k) ~ (1 + a^2)(1 - a^{2k}) / (1 - a^2) / n - 2k a^{2k} / n
            let bartlett = ((1.0 + a * a) * (1.0 - a.powi(2 * k as i32)) / (1.0 - a * a)
                - 2.0 * k as f64 * a.powi(2 * k as i32))
                / n as f64;
            assert!((lag_autocorr(&x, k) - target).abs() < 3.0 * bartlett.sqrt(), "lag {k}");
        }
    }

    #[test]
    fn ar_kernel_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(51);
        let v = gen_ar1(37, 0.0, 1.0, &mut rng);
        let a: f64 = 0.7;
        let dense = DMatrix::from_fn(37, 37, |i, j| a.powi((i as i32 - j as i32).abs()));
        assert!((ar_kernel_apply(a, &v) - &dense * &v).norm() < 1e-12 * v.norm());
    }

    #[test]
    fn homoscedastic_true_cov() {
        let cfg = DgpConfig {
            n: 200,
            p: 3,
            pi: 0.0,
            rho: 0.0,
            tau: 0.0,
            sigma2: 1.5,
            effect_var: 0.0,
            study: Study::Autocorrelation,
            seed: 52,
            fixed_beta: None,
        };
        let r = gen_dataset(&cfg).unwrap();
        let expect = linalg::spd_inverse(r.data.gram()).unwrap() * cfg.noise_var();
        assert!((r.true_cov.entries() - &expect).norm() < 1e-10 * expect.norm());
    }

    #[test]
    fn true_cov_matches_dense_sigma() {
        for study in [Study::Autocorrelation, Study::RandomEffectAligned, Study::RandomEffectUnaligned] {
            let cfg = DgpConfig {
                n: 60,
                p: 2,
                pi: 0.5,
                rho: 0.6,
                tau: 0.8,
                sigma2: 0.7,
                effect_var: 1.3,
                study,
                seed: 53,
                fixed_beta: None,
            };
            let r = gen_dataset(&cfg).unwrap();
            let x = r.data.design();
            let n = cfg.n;
            // the unaligned carrier is not exposed, so recover it from the generator
            let w = match study {
                Study::Autocorrelation => DVector::zeros(n),
                Study::RandomEffectAligned => x.column(0).into_owned(),
                Study::RandomEffectUnaligned => {
                    let mut rng = substream(cfg.seed, &[]);
                    let _b: Vec<f64> = (0..cfg.p).map(|_| StandardNormal.sample(&mut rng)).collect();
                    gen_ar1(n, cfg.pi, 1.0, &mut rng);
                    for _ in 1..cfg.p {
                        for _ in 0..n {
                            let _: f64 = StandardNormal.sample(&mut rng);
                        }
                    }
                    gen_ar1(n, cfg.rho, 1.0, &mut rng);
                    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
                }
            };
            let eff = if study == Study::Autocorrelation { 0.0 } else { cfg.effect_var };
            let sigma = DMatrix::from_fn(n, n, |i, j| {
                let d = (i as i32 - j as i32).abs();
                cfg.noise_var() * cfg.rho.powi(d) + eff * w[i] * w[j] * cfg.tau.powi(d)
            });
            let gi = r.data.gram().clone().try_inverse().unwrap();
            let dense = &gi * x.transpose() * sigma * x * &gi;
            assert!((r.true_cov.entries() - &dense).norm() < 1e-10 * dense.norm(), "{study:?}");
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let cfg = DgpConfig::autocorrelation(10.0, 9);
        let a = gen_dataset(&cfg).unwrap();
        let b = gen_dataset(&cfg).unwrap();
        assert_eq!(a.data.design(), b.data.design());
        assert_eq!(a.data.response(), b.data.response());
        assert_eq!(a.true_cov, b.true_cov);
        let c = gen_dataset(&cfg.with_seed(10)).unwrap();
        assert_ne!(a.data.response(), c.data.response());
    }

    #[test]
    fn validation() {
        let mut cfg = DgpConfig::autocorrelation(1.0, 0);
        cfg.pi = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = DgpConfig::autocorrelation(0.0, 0);
        assert!(cfg.validate().is_err());
        cfg.sigma2 = 1.0;
        cfg.fixed_beta = Some(vec![1.0; 3]);
        assert!(cfg.validate().is_err());
    }
}
