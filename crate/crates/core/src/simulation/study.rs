use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{gen_dataset, DgpConfig};
use crate::covariance::{
    block_bootstrap_cov, normalize_by_gram, prior_cov_from_gram, shrink, BootstrapConfig, ShrinkageParams,
};
use crate::error::{Error, Result};
use crate::estimators::{ols_fit, ridge_fit, tworeg_ridge_fit, CovarianceMatrix, Dataset};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ols,
    StandardRidge,
    TworegRidge,
    CorrectTworegRidge,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ols, Method::StandardRidge, Method::TworegRidge, Method::CorrectTworegRidge];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::StandardRidge => "standard_ridge",
            Method::TworegRidge => "tworeg_ridge",
            Method::CorrectTworegRidge => "correct_tworeg_ridge",
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Method::Ols => "OLS",
            Method::StandardRidge => "standard ridge",
            Method::TworegRidge => "2REG ridge",
            Method::CorrectTworegRidge => "correctly specified",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// One evaluated configuration: a method, its shrinkage (2REG ridge only) and `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arm {
    pub method: Method,
    pub shrinkage: Option<ShrinkageParams>,
    pub lambda: f64,
}

/// Per-replicate outcome of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub sq_error: f64,
    pub beta1_sq: f64,
    pub beta_sq_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub method: Method,
    pub lambda: f64,
    pub kappa: Option<f64>,
    pub mu: Option<f64>,
    pub mean_sq_error: f64,
    pub std_error: f64,
    pub mean_beta1_sq: f64,
    pub mean_beta_sq_total: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone)]
pub struct StudySpec {
    pub dgp: DgpConfig,
    pub methods: Vec<Method>,
    pub lambda_grid: Vec<f64>,
    pub shrink_grid: Vec<ShrinkageParams>,
    pub replicates: usize,
    pub bootstrap: BootstrapConfig,
}

/// Results of a study: every arm's summary plus raw outcomes for paired comparisons.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub arms: Vec<Arm>,
    pub results: Vec<StudyResult>,
    /// `outcomes[r][a]` is replicate `r` under arm `a`.
    outcomes: Vec<Vec<Outcome>>,
}

impl StudyReport {
    /// Per-replicate outcomes of the arm at `index`.
    pub fn samples(&self, index: usize) -> Vec<Outcome> {
        self.outcomes.iter().map(|r| r[index]).collect()
    }

    /// The arm with the lowest mean squared error for each (method, shrinkage)
    /// pair, in arm order. Ties go to the smaller `lambda`.
    pub fn optimal(&self) -> Vec<(usize, &StudyResult)> {
        let mut best: Vec<(usize, &StudyResult)> = Vec::new();
        for (i, (arm, res)) in self.arms.iter().zip(&self.results).enumerate() {
            match best
                .iter_mut()
                .find(|(j, _)| self.arms[*j].method == arm.method && self.arms[*j].shrinkage == arm.shrinkage)
            {
                Some(slot) => {
                    if res.mean_sq_error < slot.1.mean_sq_error {
                        *slot = (i, res);
                    }
                }
                None => best.push((i, res)),
            }
        }
        best
    }

    pub fn optimal_for(&self, method: Method, shrinkage: Option<ShrinkageParams>) -> Option<(usize, &StudyResult)> {
        self.optimal().into_iter().find(|(i, _)| self.arms[*i].method == method && self.arms[*i].shrinkage == shrinkage)
    }
}

fn arms_for(spec: &StudySpec) -> Vec<Arm> {
    let mut arms = Vec::new();
    for &method in &Method::ALL {
        if !spec.methods.contains(&method) {
            continue;
        }
        match method {
            Method::Ols => arms.push(Arm { method, shrinkage: None, lambda: 0.0 }),
            Method::StandardRidge | Method::CorrectTworegRidge => {
                arms.extend(spec.lambda_grid.iter().map(|&lambda| Arm { method, shrinkage: None, lambda }))
            }
            Method::TworegRidge => {
                for &s in &spec.shrink_grid {
                    arms.extend(spec.lambda_grid.iter().map(|&lambda| Arm { method, shrinkage: Some(s), lambda }));
                }
            }
        }
    }
    arms
}

fn validate(spec: &StudySpec) -> Result<()> {
    spec.dgp.validate()?;
    if spec.replicates < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 replicates, got {}", spec.replicates)));
    }
    if spec.methods.is_empty() {
        return Err(Error::InvalidParameter("no methods requested".into()));
    }
    if spec.lambda_grid.is_empty() && spec.methods.iter().any(|m| *m != Method::Ols) {
        return Err(Error::InvalidParameter("lambda grid is empty".into()));
    }
    if let Some(l) = spec.lambda_grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidPenalty(*l));
    }
    if spec.methods.contains(&Method::TworegRidge) {
        if spec.shrink_grid.is_empty() {
            return Err(Error::InvalidParameter("shrinkage grid is empty".into()));
        }
        for s in &spec.shrink_grid {
            ShrinkageParams::new(s.kappa, s.mu)?;
        }
        spec.bootstrap.check_for(spec.dgp.n)?;
    }
    Ok(())
}

fn outcome(beta_hat: &nalgebra::DVector<f64>, beta: &nalgebra::DVector<f64>) -> Outcome {
    Outcome {
        sq_error: (beta_hat - beta).norm_squared(),
        beta1_sq: beta_hat[0] * beta_hat[0],
        beta_sq_total: beta_hat.norm_squared(),
    }
}

fn run_replicate(spec: &StudySpec, arms: &[Arm], r: usize) -> Result<Vec<Outcome>> {
    let rep = gen_dataset(&spec.dgp.with_seed(derive_seed(spec.dgp.seed, &[r as u64, 0])))?;
    let data: &Dataset = &rep.data;
    let gram = data.gram();

    let mut shrunk: Vec<(ShrinkageParams, CovarianceMatrix)> = Vec::new();
    if arms.iter().any(|a| a.method == Method::TworegRidge) {
        let boot = BootstrapConfig { seed: derive_seed(spec.dgp.seed, &[r as u64, 1]), ..spec.bootstrap };
        let crude = block_bootstrap_cov(data, &boot)?;
        let prior = prior_cov_from_gram(gram, &crude)?;
        for &s in &spec.shrink_grid {
            shrunk.push((s, normalize_by_gram(&shrink(&crude, &prior, s)?, gram)?));
        }
    }
    let correct = if arms.iter().any(|a| a.method == Method::CorrectTworegRidge) {
        Some(normalize_by_gram(&rep.true_cov, gram)?)
    } else {
        None
    };

    arms.iter()
        .map(|arm| {
            let fit = match arm.method {
                Method::Ols => ols_fit(data)?,
                Method::StandardRidge => ridge_fit(data, arm.lambda)?,
                Method::TworegRidge => {
                    let s = arm.shrinkage.expect("2REG arms carry shrinkage");
                    let cov = &shrunk.iter().find(|(p, _)| *p == s).expect("shrunk covariance").1;
                    tworeg_ridge_fit(data, cov, arm.lambda)?
                }
                Method::CorrectTworegRidge => {
                    tworeg_ridge_fit(data, correct.as_ref().expect("true covariance"), arm.lambda)?
                }
            };
            Ok(outcome(&fit.values, &rep.beta))
        })
        .collect()
}

/// Monte Carlo comparison of the estimators over a lambda grid.
///
/// Replicate `r` draws its data from substream `(seed, r, 0)` and its
/// bootstrap from `(seed, r, 1)`; any failed replicate aborts the study.
pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    validate(spec)?;
    let arms = arms_for(spec);
    let per_rep: Vec<Result<Vec<Outcome>>> =
        (0..spec.replicates).into_par_iter().map(|r| run_replicate(spec, &arms, r)).collect();
    let outcomes: Vec<Vec<Outcome>> = per_rep.into_iter().collect::<Result<_>>()?;

    let m = spec.replicates as f64;
    let results = arms
        .iter()
        .enumerate()
        .map(|(a, arm)| {
            let mut sum = 0.0;
            let mut b1 = 0.0;
            let mut tot = 0.0;
            for rep in &outcomes {
                sum += rep[a].sq_error;
                b1 += rep[a].beta1_sq;
                tot += rep[a].beta_sq_total;
            }
            let mean = sum / m;
            let ss: f64 = outcomes.iter().map(|rep| (rep[a].sq_error - mean).powi(2)).sum();
            StudyResult {
                method: arm.method,
                lambda: arm.lambda,
                kappa: arm.shrinkage.map(|s| s.kappa),
                mu: arm.shrinkage.map(|s| s.mu),
                mean_sq_error: mean,
                std_error: (ss / (m - 1.0)).sqrt() / m.sqrt(),
                mean_beta1_sq: b1 / m,
                mean_beta_sq_total: tot / m,
                replicates: spec.replicates,
            }
        })
        .collect();
    Ok(StudyReport { arms, results, outcomes })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// CSV of every arm. Values are printed in shortest round-trip form.
pub fn results_csv(results: &[StudyResult]) -> String {
    let mut out =
        String::from("method,lambda,kappa,mu,mean_sq_error,std_error,mean_beta1_sq,replicates,mean_beta_sq_total\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method.as_str(),
            r.lambda,
            fmt_opt(r.kappa),
            fmt_opt(r.mu),
            r.mean_sq_error,
            r.std_error,
            r.mean_beta1_sq,
            r.replicates,
            r.mean_beta_sq_total
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableQuantity {
    /// Mean squared error with its standard error in parentheses.
    SqError,
    /// Mean `beta_1^2` with the mean total `sum beta_j^2` in parentheses.
    Beta1Sq,
}

/// Text table with one row per method and one column per shrinkage pair.
/// Each cell is at the optimal lambda; methods without shrinkage fill the first column.
pub fn format_table(report: &StudyReport, shrink_grid: &[ShrinkageParams], quantity: TableQuantity) -> String {
    let cols: Vec<String> = shrink_grid.iter().map(|s| format!("mu={} kappa={}", s.mu, s.kappa)).collect();
    let width = cols.iter().map(String::len).max().unwrap_or(0).max(18);
    let mut out = String::new();
    let _ = write!(out, "{:<22}", "method");
    for c in &cols {
        let _ = write!(out, " | {c:>width$}");
    }
    out.push('\n');
    let _ = writeln!(out, "{}", "-".repeat(22 + cols.len() * (width + 3)));
    let cell = |r: &StudyResult| match quantity {
        TableQuantity::SqError => format!("{:.4} ({:.4})", r.mean_sq_error, r.std_error),
        TableQuantity::Beta1Sq => format!("{:.3} ({:.3})", r.mean_beta1_sq, r.mean_beta_sq_total),
    };
    let methods: Vec<Method> = Method::ALL.into_iter().filter(|m| report.arms.iter().any(|a| a.method == *m)).collect();
    for method in methods {
        let _ = write!(out, "{:<22}", method.label());
        let mut lambdas = Vec::new();
        if method == Method::TworegRidge {
            for s in shrink_grid {
                match report.optimal_for(method, Some(*s)) {
                    Some((_, r)) => {
                        let _ = write!(out, " | {:>width$}", cell(r));
                        lambdas.push(r.lambda);
                    }
                    None => {
                        let _ = write!(out, " | {:>width$}", "");
                    }
                }
            }
        } else if let Some((_, r)) = report.optimal_for(method, None) {
            let _ = write!(out, " | {:>width$}", cell(r));
            lambdas.push(r.lambda);
            for _ in 1..cols.len() {
                let _ = write!(out, " | {:>width$}", "N/R");
            }
        }
        out.push('\n');
        let _ = write!(out, "{:<22}", "  lambda");
        for l in &lambdas {
            let _ = write!(out, " | {:>width$}", format!("{l:.4}"));
        }
        out.push('\n');
    }
    out
}
