use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::{key, parse_lambda_grid, parse_list, parse_shrink_grid, Key, Settings};
use crate::covariance::{
    block_bootstrap_cov, cv_hac_cov, normalize_by_gram, prior_cov_from_gram, select_shrinkage_detailed,
    select_shrinkage_with, shrink, BootstrapConfig, FoldPlan, Metric, SelectionOutcome, ShrinkageParams,
};
use crate::error::{Error, Result};
use crate::estimators::{
    normal_tworeg_fit, ols_fit, ridge_fit, tworeg_ridge_fit, CovStage, CovarianceMatrix, Dataset, GaussianPrior,
};
use crate::io::{format_matrix, read_dataset, read_matrix};
use crate::realdata::{load_prices, run_real_study, CurveMethod, PriceSchema, RealStudyConfig, ReturnSpec, SplitDates};
use crate::simulation::{format_table, results_csv, run_study, DgpConfig, Method, Study, StudySpec, TableQuantity};

pub static SIMULATE_KEYS: &[Key] = &[
    key("study", "autocorrelation", "autocorrelation | random_effect_aligned | random_effect_unaligned"),
    key("n", "2000", "observations per replicate"),
    key("p", "10", "covariates"),
    key("pi", "default", "AR coefficient of the first covariate"),
    key("rho", "default", "AR coefficient of the noise"),
    key("tau", "default", "AR coefficient of the random effect"),
    key("sigma2", "default", "noise scale; noise variance is sigma2 * p"),
    key("effect-var", "default", "variance of the random effect"),
    key("replicates", "2000", "Monte Carlo replicates"),
    key("seed", "7", "root seed"),
    key("lambda-grid", "0,log:0:4:41", "ridge penalties; items may be log:a:b:k"),
    key("shrink-grid", "diagonal", "full | diagonal | kappa:mu,..."),
    key("methods", "ols,standard_ridge,tworeg_ridge,correct_tworeg_ridge", "methods to compare"),
    key("bootstrap-iterations", "2000", "bootstrap replicates per dataset"),
    key("bootstrap-blocks", "20", "bootstrap blocks"),
    key("out", "tworeg-out", "output directory"),
];

pub static COV_KEYS: &[Key] = &[
    key("data", "", "CSV with a header; the response column is excluded from the design"),
    key("response", "y", "response column name"),
    key("estimator", "bootstrap", "bootstrap | hac"),
    key("folds", "10", "cross-validation folds for selection and the HAC estimate"),
    key("bootstrap-iterations", "2000", "bootstrap replicates"),
    key("bootstrap-blocks", "20", "bootstrap blocks"),
    key("kappa", "", "fixed kappa; selected by cross-validation when absent"),
    key("mu", "", "fixed mu; selected by cross-validation when absent"),
    key("shrink-grid", "full", "full | diagonal | kappa:mu,..."),
    key("metric", "frobenius", "frobenius | gaussian_kl"),
    key("seed", "7", "root seed"),
    key("out", "tworeg-out", "output directory"),
];

pub static REALDATA_KEYS: &[Key] = &[
    key("prices", "", "price CSV in long format"),
    key("tickers", "MSFT,AAPL,FB,GOOGL,AMZN", "tickers, each used once as the target"),
    key("date-column", "date", "date column (YYYY-MM-DD)"),
    key("symbol-column", "symbol", "ticker column"),
    key("close-column", "close", "closing price column"),
    key("train-end", "2016-12-30", "last training date"),
    key("test-start", "2017-01-03", "first test date"),
    key("horizon", "10", "forecast horizon in trading days"),
    key("short-lag", "1", "short return lag"),
    key("long-lag", "5", "long return lag"),
    key("lambda-grid", "log:0:6:25", "ridge penalties; items may be log:a:b:k"),
    key("bootstrap-iterations", "2000", "bootstrap replicates"),
    key("bootstrap-blocks", "10", "bootstrap blocks, also the cross-validation folds"),
    key("shrink-grid", "full", "full | diagonal | kappa:mu,..."),
    key("metric", "frobenius", "frobenius | gaussian_kl"),
    key("seed", "7", "root seed"),
    key("out", "tworeg-out", "output directory"),
];

pub static FIT_KEYS: &[Key] = &[
    key("data", "", "CSV with a header; the response column is excluded from the design"),
    key("response", "y", "response column name"),
    key("estimator", "ols", "ols | ridge | tworeg_ridge | normal_tworeg"),
    key("lambda", "0", "penalty"),
    key("cov", "", "covariance matrix file; estimated by block bootstrap when absent"),
    key("kappa", "0", "shrinkage toward the prior for an estimated covariance"),
    key("mu", "0", "shrinkage toward the prior eigenbasis for an estimated covariance"),
    key("bootstrap-iterations", "2000", "bootstrap replicates"),
    key("bootstrap-blocks", "20", "bootstrap blocks"),
    key("seed", "7", "root seed"),
    key("out", "tworeg-out", "output directory"),
];

pub fn out_dir(s: &Settings) -> Result<PathBuf> {
    let out = PathBuf::from(s.get("out"));
    fs::create_dir_all(&out)?;
    Ok(out)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn json_string(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn required<'a>(s: &'a Settings, name: &str) -> Result<&'a str> {
    s.opt(name).ok_or_else(|| Error::InvalidParameter(format!("--{name} is required")))
}

fn bootstrap_config(s: &Settings) -> Result<BootstrapConfig> {
    BootstrapConfig::new(s.parse("bootstrap-iterations")?, s.parse("bootstrap-blocks")?, s.parse("seed")?)
}

/// Fills `default` entries with the study's reference settings and records them.
fn resolve_dgp(s: &mut Settings) -> Result<DgpConfig> {
    let study: Study = s.parse("study")?;
    let seed: u64 = s.parse("seed")?;
    let base = match study {
        Study::Autocorrelation => DgpConfig::autocorrelation(10.0, seed),
        Study::RandomEffectAligned | Study::RandomEffectUnaligned => {
            DgpConfig { study, ..DgpConfig::random_effect(seed) }
        }
    };
    let mut pick = |name: &str, fallback: f64| -> Result<f64> {
        if s.get(name) == "default" {
            s.set(name, fallback.to_string());
        }
        s.parse(name)
    };
    let cfg = DgpConfig {
        pi: pick("pi", base.pi)?,
        rho: pick("rho", base.rho)?,
        tau: pick("tau", base.tau)?,
        sigma2: pick("sigma2", base.sigma2)?,
        effect_var: pick("effect-var", base.effect_var)?,
        n: s.parse("n")?,
        p: s.parse("p")?,
        ..base
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn simulate(s: &mut Settings) -> Result<Vec<String>> {
    let dgp = resolve_dgp(s)?;
    let methods = parse_list(s.get("methods")).iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>>>()?;
    let spec = StudySpec {
        dgp,
        methods,
        lambda_grid: parse_lambda_grid(s.get("lambda-grid"))?,
        shrink_grid: parse_shrink_grid(s.get("shrink-grid"))?,
        replicates: s.parse("replicates")?,
        bootstrap: bootstrap_config(s)?,
    };
    let report = run_study(&spec)?;
    let dir = out_dir(s)?;
    write(&dir, "results.csv", &results_csv(&report.results))?;
    let optimal: Vec<_> = report.optimal().into_iter().map(|(_, r)| r.clone()).collect();
    write(&dir, "optimal.csv", &results_csv(&optimal))?;
    let table = format!(
        "Squared estimation error, mean (standard error), at the optimal lambda\n\n{}\n\
         Mean beta_1^2 (mean sum of beta_j^2), at the optimal lambda\n\n{}",
        format_table(&report, &spec.shrink_grid, TableQuantity::SqError),
        format_table(&report, &spec.shrink_grid, TableQuantity::Beta1Sq)
    );
    write(&dir, "table.txt", &table)?;
    Ok(vec!["results.csv".into(), "optimal.csv".into(), "table.txt".into()])
}

pub fn cov(s: &mut Settings) -> Result<Vec<String>> {
    let (data, _) = read_dataset(Path::new(required(s, "data")?), s.get("response"))?;
    let metric: Metric = s.parse("metric")?;
    let folds_n: usize = s.parse("folds")?;
    let boot = bootstrap_config(s)?;
    let hac = match s.get("estimator") {
        "bootstrap" => false,
        "hac" => true,
        other => return Err(Error::InvalidParameter(format!("unknown estimator {other:?}"))),
    };
    let crude = if hac {
        cv_hac_cov(&data, &FoldPlan::contiguous(data.n(), folds_n)?)?
    } else {
        block_bootstrap_cov(&data, &boot)?
    };
    let prior = prior_cov_from_gram(data.gram(), &crude)?;

    let fixed = (s.parse_opt::<f64>("kappa")?, s.parse_opt::<f64>("mu")?);
    let (params, outcome): (ShrinkageParams, Option<SelectionOutcome>) = match fixed {
        (Some(k), Some(m)) => (ShrinkageParams::new(k, m)?, None),
        (None, None) => {
            let grid = parse_shrink_grid(s.get("shrink-grid"))?;
            let plan = FoldPlan::contiguous(data.n(), folds_n)?;
            let o = if hac {
                let est = |d: &Dataset, _| cv_hac_cov(d, &FoldPlan::contiguous(d.n(), folds_n.min(d.n()))?);
                select_shrinkage_with(&data, &plan, &grid, metric, est, est)?
            } else {
                select_shrinkage_detailed(&data, &plan, &grid, &boot, metric)?
            };
            (o.selected, Some(o))
        }
        (Some(k), None) => (ShrinkageParams::new(k, 0.0)?, None),
        (None, Some(m)) => (ShrinkageParams::new(0.0, m)?, None),
    };
    let shrunk = shrink(&crude, &prior, params)?;
    let normalized = normalize_by_gram(&shrunk, data.gram())?;

    let dir = out_dir(s)?;
    write(&dir, "crude.txt", &format_matrix(crude.entries()))?;
    write(&dir, "prior.txt", &format_matrix(prior.entries()))?;
    write(&dir, "shrunk.txt", &format_matrix(shrunk.entries()))?;
    write(&dir, "normalized.txt", &format_matrix(normalized.entries()))?;
    let scores: Vec<_> = outcome
        .iter()
        .flat_map(|o| o.scores.iter())
        .map(|(p, v)| json!({ "kappa": p.kappa, "mu": p.mu, "score": v }))
        .collect();
    let selection = json!({
        "kappa": params.kappa,
        "mu": params.mu,
        "selected_by": if outcome.is_some() { "cross_validation" } else { "fixed" },
        "estimator": s.get("estimator"),
        "metric": s.get("metric"),
        "scores": scores,
    });
    write(&dir, "selection.json", &json_string(&selection))?;
    Ok(["crude.txt", "prior.txt", "shrunk.txt", "normalized.txt", "selection.json"].map(String::from).to_vec())
}

pub fn realdata(s: &mut Settings) -> Result<Vec<String>> {
    let path = PathBuf::from(required(s, "prices")?);
    let tickers = parse_list(s.get("tickers"));
    if tickers.is_empty() {
        return Err(Error::InvalidParameter("no tickers given".into()));
    }
    let schema = PriceSchema {
        date: s.get("date-column").into(),
        symbol: s.get("symbol-column").into(),
        close: s.get("close-column").into(),
    };
    let date = |name: &str| {
        chrono::NaiveDate::parse_from_str(s.get(name), "%Y-%m-%d")
            .map_err(|_| Error::InvalidParameter(format!("invalid date for {name}: {:?}", s.get(name))))
    };
    let cfg = RealStudyConfig {
        lambda_grid: parse_lambda_grid(s.get("lambda-grid"))?,
        bootstrap: bootstrap_config(s)?,
        shrink_grid: parse_shrink_grid(s.get("shrink-grid"))?,
        metric: s.parse("metric")?,
        split: SplitDates { train_end: date("train-end")?, test_start: date("test-start")? },
        returns: ReturnSpec {
            horizon: s.parse("horizon")?,
            short_lag: s.parse("short-lag")?,
            long_lag: s.parse("long-lag")?,
        },
    };
    let series = load_prices(&path, &tickers, &schema)?;
    let report = run_real_study(&series, &cfg)?;
    let dir = out_dir(s)?;
    write(&dir, "curve.csv", &report.curve_csv())?;
    let peaks: serde_json::Map<String, serde_json::Value> = CurveMethod::ALL
        .iter()
        .filter_map(|m| report.peak(*m).map(|p| (m.as_str().to_string(), json!({ "lambda": p.lambda, "r2": p.r2 }))))
        .collect();
    let summary = json!({
        "peaks": peaks,
        "targets": report.targets,
        "aligned_rows": series[0].dates.len(),
    });
    write(&dir, "summary.json", &json_string(&summary))?;
    Ok(vec!["curve.csv".into(), "summary.json".into()])
}

pub fn fit(s: &mut Settings) -> Result<Vec<String>> {
    let (data, names) = read_dataset(Path::new(required(s, "data")?), s.get("response"))?;
    let lambda: f64 = s.parse("lambda")?;
    let estimator = s.get("estimator").to_string();
    let needs_cov = matches!(estimator.as_str(), "tworeg_ridge" | "normal_tworeg");
    let mut cov_source = serde_json::Value::Null;
    let cov = if !needs_cov {
        None
    } else if let Some(path) = s.opt("cov") {
        cov_source = json!(path);
        Some(CovarianceMatrix::new(read_matrix(Path::new(path))?, CovStage::Normalized)?)
    } else {
        let crude = block_bootstrap_cov(&data, &bootstrap_config(s)?)?;
        let prior = prior_cov_from_gram(data.gram(), &crude)?;
        let params = ShrinkageParams::new(s.parse("kappa")?, s.parse("mu")?)?;
        cov_source = json!("block_bootstrap");
        Some(normalize_by_gram(&shrink(&crude, &prior, params)?, data.gram())?)
    };
    let coef = match estimator.as_str() {
        "ols" => ols_fit(&data)?,
        "ridge" => ridge_fit(&data, lambda)?,
        "tworeg_ridge" => tworeg_ridge_fit(&data, cov.as_ref().expect("covariance"), lambda)?,
        "normal_tworeg" => {
            normal_tworeg_fit(&ols_fit(&data)?, cov.as_ref().expect("covariance"), &GaussianPrior::ridge(lambda)?)?
        }
        other => return Err(Error::InvalidParameter(format!("unknown estimator {other:?}"))),
    };
    let dir = out_dir(s)?;
    let out = json!({
        "estimator": coef.kind.as_str(),
        "lambda": coef.lambda,
        "kappa": if needs_cov && s.opt("cov").is_none() { json!(s.parse::<f64>("kappa")?) } else { serde_json::Value::Null },
        "mu": if needs_cov && s.opt("cov").is_none() { json!(s.parse::<f64>("mu")?) } else { serde_json::Value::Null },
        "seed": s.parse::<u64>("seed")?,
        "covariance": cov_source,
        "names": names,
        "coefficients": coef.values.as_slice(),
    });
    write(&dir, "coefficients.json", &json_string(&out))?;
    Ok(vec!["coefficients.json".into()])
}
