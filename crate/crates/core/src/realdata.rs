//! Forecasting ten-day log returns of a stock from the short and long
//! log returns of a basket of stocks, comparing standard ridge with the
//! two-stage ridge out of sample.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{
    block_bootstrap_cov, normalize_by_gram, prior_cov_from_gram, select_shrinkage_detailed, shrink, BootstrapConfig,
    FoldPlan, Metric, ShrinkageParams,
};
use crate::error::{Error, Result};
use crate::estimators::{ridge_fit, tworeg_ridge_fit, Coefficients, CovarianceMatrix, Dataset};
use crate::rng::derive_seed;

/// Fewest aligned trading days accepted by [`load_prices`].
pub const MIN_ALIGNED_ROWS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
}

/// Column names of the price file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceSchema {
    pub date: String,
    pub symbol: String,
    pub close: String,
}

impl Default for PriceSchema {
    fn default() -> Self {
        Self { date: "date".into(), symbol: "symbol".into(), close: "close".into() }
    }
}

/// Loads the requested tickers and aligns them on their common trading dates.
pub fn load_prices(path: &Path, tickers: &[String], schema: &PriceSchema) -> Result<Vec<PriceSeries>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("no column named {name:?}") })
    };
    let (di, si, ci) = (col(&schema.date)?, col(&schema.symbol)?, col(&schema.close)?);

    let wanted: HashMap<&str, usize> = tickers.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut raw: Vec<BTreeMap<NaiveDate, f64>> = vec![BTreeMap::new(); tickers.len()];
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let Some(&t) = rec.get(si).and_then(|s| wanted.get(s)) else {
            continue;
        };
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse { line, message: "missing field".into() });
        let date_text = field(di)?;
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d")
            .map_err(|_| Error::Parse { line, message: format!("bad date {date_text:?}") })?;
        let close_text = field(ci)?;
        let close: f64 = close_text
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad close price {close_text:?}") })?;
        if !(close > 0.0) || !close.is_finite() {
            return Err(Error::Parse { line, message: format!("close price must be positive, got {close}") });
        }
        if raw[t].insert(date, close).is_some() {
            return Err(Error::Parse { line, message: format!("duplicate date {date} for {}", tickers[t]) });
        }
    }
    if let Some((t, _)) = raw.iter().enumerate().find(|(_, m)| m.is_empty()) {
        return Err(Error::TickerNotFound(tickers[t].clone()));
    }
    let mut common: BTreeSet<NaiveDate> = raw[0].keys().copied().collect();
    for m in &raw[1..] {
        common.retain(|d| m.contains_key(d));
    }
    if common.len() < MIN_ALIGNED_ROWS {
        return Err(Error::InsufficientData(format!(
            "{} aligned trading days, need at least {MIN_ALIGNED_ROWS}",
            common.len()
        )));
    }
    let dates: Vec<NaiveDate> = common.into_iter().collect();
    Ok(tickers
        .iter()
        .zip(&raw)
        .map(|(t, m)| PriceSeries {
            ticker: t.clone(),
            dates: dates.clone(),
            closes: dates.iter().map(|d| m[d]).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Inclusive last training date and first test date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitDates {
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
}

impl Default for SplitDates {
    fn default() -> Self {
        Self {
            train_end: NaiveDate::from_ymd_opt(2016, 12, 30).expect("valid date"),
            test_start: NaiveDate::from_ymd_opt(2017, 1, 3).expect("valid date"),
        }
    }
}

/// Restricts aligned series to the rows of one split.
pub fn split_series(series: &[PriceSeries], dates: &SplitDates, split: Split) -> Vec<PriceSeries> {
    let keep = |d: &NaiveDate| match split {
        Split::Train => *d <= dates.train_end,
        Split::Test => *d >= dates.test_start,
    };
    series
        .iter()
        .map(|s| {
            let (d, c): (Vec<NaiveDate>, Vec<f64>) =
                s.dates.iter().zip(&s.closes).filter(|(d, _)| keep(d)).map(|(d, c)| (*d, *c)).unzip();
            PriceSeries { ticker: s.ticker.clone(), dates: d, closes: c }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnSpec {
    pub horizon: usize,
    pub short_lag: usize,
    pub long_lag: usize,
}

impl Default for ReturnSpec {
    fn default() -> Self {
        Self { horizon: 10, short_lag: 1, long_lag: 5 }
    }
}

/// Response and features for one target. Kept as raw matrices because
/// degenerate price paths (constant prices) produce rank-deficient designs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnDataset {
    pub target_ticker: String,
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
    pub covariate_names: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub split: Split,
}

impl ReturnDataset {
    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::new(self.design.clone(), self.response.clone())
    }
}

/// Row `i` predicts `log p_{i+h} - log p_i` of the target from
/// `log p_i - log p_{i-short}` and `log p_i - log p_{i-long}` of every series.
/// Rows lacking any of these are dropped.
pub fn build_return_dataset(
    series: &[PriceSeries],
    target: &str,
    spec: &ReturnSpec,
    split: Split,
) -> Result<ReturnDataset> {
    let t = series.iter().position(|s| s.ticker == target).ok_or_else(|| Error::TickerNotFound(target.to_owned()))?;
    let len = series[t].closes.len();
    if series.iter().any(|s| s.closes.len() != len || s.dates != series[t].dates) {
        return Err(Error::InvalidParameter("price series are not date-aligned".into()));
    }
    if spec.short_lag == 0 || spec.long_lag == 0 || spec.horizon == 0 {
        return Err(Error::InvalidParameter("horizon and lags must be positive".into()));
    }
    let head = spec.short_lag.max(spec.long_lag);
    if len <= head + spec.horizon {
        return Err(Error::InsufficientData(format!(
            "{len} rows cannot cover lag {head} and horizon {}",
            spec.horizon
        )));
    }
    let rows = len - head - spec.horizon;
    let logs: Vec<Vec<f64>> = series.iter().map(|s| s.closes.iter().map(|c| c.ln()).collect()).collect();
    let lt = &logs[t];
    let response = DVector::from_fn(rows, |r, _| {
        let i = r + head;
        lt[i + spec.horizon] - lt[i]
    });
    let design = DMatrix::from_fn(rows, 2 * series.len(), |r, c| {
        let i = r + head;
        let l = &logs[c / 2];
        let lag = if c % 2 == 0 { spec.short_lag } else { spec.long_lag };
        l[i] - l[i - lag]
    });
    let covariate_names =
        series.iter().flat_map(|s| [format!("{}_short", s.ticker), format!("{}_long", s.ticker)]).collect();
    Ok(ReturnDataset {
        target_ticker: target.to_owned(),
        design,
        response,
        covariate_names,
        dates: series[t].dates[head..head + rows].to_vec(),
        split,
    })
}

/// `1 - SSE / sum y^2`, the fraction of squared return explained relative to predicting zero.
pub fn evaluate_r2(model: &Coefficients, test: &ReturnDataset) -> Result<f64> {
    let (sse, ssy) = squared_errors(&model.values, test)?;
    r2_from_sums(sse, ssy)
}

fn squared_errors(beta: &DVector<f64>, test: &ReturnDataset) -> Result<(f64, f64)> {
    if beta.len() != test.design.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} coefficients but test design has {} columns",
            beta.len(),
            test.design.ncols()
        )));
    }
    let resid = &test.response - &test.design * beta;
    Ok((resid.norm_squared(), test.response.norm_squared()))
}

pub fn r2_from_sums(sse: f64, ssy: f64) -> Result<f64> {
    if ssy == 0.0 {
        return Err(Error::DegenerateR2);
    }
    Ok(1.0 - sse / ssy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMethod {
    StandardRidge,
    TworegRidge,
    /// Two-stage ridge on the crude bootstrap covariance with `kappa = mu = 0`.
    TworegRidgeUnregularized,
}

impl CurveMethod {
    pub const ALL: [CurveMethod; 3] =
        [CurveMethod::StandardRidge, CurveMethod::TworegRidge, CurveMethod::TworegRidgeUnregularized];

    pub fn as_str(&self) -> &'static str {
        match self {
            CurveMethod::StandardRidge => "standard_ridge",
            CurveMethod::TworegRidge => "tworeg_ridge",
            CurveMethod::TworegRidgeUnregularized => "tworeg_ridge_unregularized",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RealStudyConfig {
    pub lambda_grid: Vec<f64>,
    /// `blocks` doubles as the number of cross-validation folds.
    pub bootstrap: BootstrapConfig,
    pub shrink_grid: Vec<ShrinkageParams>,
    pub metric: Metric,
    pub split: SplitDates,
    pub returns: ReturnSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub method: CurveMethod,
    pub lambda: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSummary {
    pub ticker: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub selected: ShrinkageParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealStudyReport {
    pub curve: Vec<CurvePoint>,
    pub targets: Vec<TargetSummary>,
}

impl RealStudyReport {
    /// Highest pooled r² of a method and the lambda attaining it (smallest on ties).
    pub fn peak(&self, method: CurveMethod) -> Option<CurvePoint> {
        self.curve.iter().filter(|p| p.method == method).fold(None, |best: Option<CurvePoint>, p| match best {
            Some(b) if b.r2 >= p.r2 => Some(b),
            _ => Some(*p),
        })
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("method,lambda,r2\n");
        for p in &self.curve {
            out.push_str(&format!("{},{},{}\n", p.method.as_str(), p.lambda, p.r2));
        }
        out
    }
}

struct TargetFit {
    summary: TargetSummary,
    /// `(sse, ssy)` per method then lambda.
    sums: Vec<Vec<(f64, f64)>>,
}

fn fit_target(train: &ReturnDataset, test: &ReturnDataset, cfg: &RealStudyConfig, t: usize) -> Result<TargetFit> {
    let data = train.to_dataset()?;
    let gram = data.gram();
    let folds = FoldPlan::contiguous(data.n(), cfg.bootstrap.blocks)?;
    let select_cfg = BootstrapConfig { seed: derive_seed(cfg.bootstrap.seed, &[t as u64, 1]), ..cfg.bootstrap };
    let outcome = select_shrinkage_detailed(&data, &folds, &cfg.shrink_grid, &select_cfg, cfg.metric)?;
    let crude_cfg = BootstrapConfig { seed: derive_seed(cfg.bootstrap.seed, &[t as u64, 0]), ..cfg.bootstrap };
    let crude = block_bootstrap_cov(&data, &crude_cfg)?;
    let prior = prior_cov_from_gram(gram, &crude)?;
    let regularized = normalize_by_gram(&shrink(&crude, &prior, outcome.selected)?, gram)?;
    let unregularized = normalize_by_gram(&crude, gram)?;

    let fit = |method: CurveMethod, lambda: f64| -> Result<Coefficients> {
        let cov: &CovarianceMatrix = match method {
            CurveMethod::StandardRidge => return ridge_fit(&data, lambda),
            CurveMethod::TworegRidge => &regularized,
            CurveMethod::TworegRidgeUnregularized => &unregularized,
        };
        tworeg_ridge_fit(&data, cov, lambda)
    };
    let sums = CurveMethod::ALL
        .iter()
        .map(|&m| cfg.lambda_grid.iter().map(|&l| squared_errors(&fit(m, l)?.values, test)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(TargetFit {
        summary: TargetSummary {
            ticker: train.target_ticker.clone(),
            train_rows: train.response.len(),
            test_rows: test.response.len(),
            selected: outcome.selected,
        },
        sums,
    })
}

/// Out-of-sample r² curves pooled over every series as a prediction target.
pub fn run_real_study(series: &[PriceSeries], cfg: &RealStudyConfig) -> Result<RealStudyReport> {
    if series.is_empty() {
        return Err(Error::InvalidParameter("no price series".into()));
    }
    if cfg.lambda_grid.is_empty() {
        return Err(Error::InvalidParameter("lambda grid is empty".into()));
    }
    if let Some(l) = cfg.lambda_grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidPenalty(*l));
    }
    let train_series = split_series(series, &cfg.split, Split::Train);
    let test_series = split_series(series, &cfg.split, Split::Test);
    let pairs = series
        .iter()
        .map(|s| {
            Ok((
                build_return_dataset(&train_series, &s.ticker, &cfg.returns, Split::Train)?,
                build_return_dataset(&test_series, &s.ticker, &cfg.returns, Split::Test)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let fits: Vec<Result<TargetFit>> =
        pairs.par_iter().enumerate().map(|(t, (train, test))| fit_target(train, test, cfg, t)).collect();
    let fits: Vec<TargetFit> = fits.into_iter().collect::<Result<_>>()?;

    let mut curve = Vec::new();
    for (m, &method) in CurveMethod::ALL.iter().enumerate() {
        for (k, &lambda) in cfg.lambda_grid.iter().enumerate() {
            let (sse, ssy) = fits.iter().fold((0.0, 0.0), |acc, f| (acc.0 + f.sums[m][k].0, acc.1 + f.sums[m][k].1));
            curve.push(CurvePoint { method, lambda, r2: r2_from_sums(sse, ssy)? });
        }
    }
    Ok(RealStudyReport { curve, targets: fits.into_iter().map(|f| f.summary).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(ticker: &str, closes: Vec<f64>) -> PriceSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = (0..closes.len()).map(|i| start + chrono::Days::new(i as u64)).collect();
        PriceSeries { ticker: ticker.into(), dates, closes }
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let s = vec![series("A", vec![7.0; 40]), series("B", vec![3.0; 40])];
        let r = build_return_dataset(&s, "A", &ReturnSpec::default(), Split::Train).unwrap();
        assert_eq!(r.response.len(), 40 - 5 - 10);
        assert!(r.response.iter().all(|v| *v == 0.0));
        assert!(r.design.iter().all(|v| *v == 0.0));
        assert_eq!(r.covariate_names, vec!["A_short", "A_long", "B_short", "B_long"]);
    }

    #[test]
    fn geometric_prices_closed_form() {
        let s = vec![series("A", (0..40).map(|i| 2f64.powi(i)).collect())];
        let r = build_return_dataset(&s, "A", &ReturnSpec::default(), Split::Test).unwrap();
        let l2 = 2f64.ln();
        for i in 0..r.response.len() {
            assert!((r.design[(i, 0)] - l2).abs() < 1e-12);
            assert!((r.design[(i, 1)] - 5.0 * l2).abs() < 1e-12);
            assert!((r.response[i] - 10.0 * l2).abs() < 1e-12);
        }
    }

    #[test]
    fn features_use_no_future_prices() {
        // perturbing prices after row i leaves row i's features unchanged
        let base: Vec<f64> = (0..60).map(|i| 100.0 + (i as f64 * 0.7).sin()).collect();
        let a = build_return_dataset(&[series("A", base.clone())], "A", &ReturnSpec::default(), Split::Train).unwrap();
        for cut in [10, 25, 40] {
            let mut bumped = base.clone();
            for v in bumped.iter_mut().skip(cut + 1) {
                *v *= 1.5;
            }
            let b = build_return_dataset(&[series("A", bumped)], "A", &ReturnSpec::default(), Split::Train).unwrap();
            for r in 0..a.response.len() {
                if r + 5 <= cut {
                    assert_eq!(a.design.row(r), b.design.row(r));
                }
            }
        }
    }

    #[test]
    fn short_series_rejected() {
        let s = vec![series("A", vec![1.0; 15])];
        assert!(matches!(
            build_return_dataset(&s, "A", &ReturnSpec::default(), Split::Train),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            build_return_dataset(&s, "Z", &ReturnSpec::default(), Split::Train),
            Err(Error::TickerNotFound(_))
        ));
    }

    #[test]
    fn r2_closed_forms() {
        let test = ReturnDataset {
            target_ticker: "A".into(),
            design: DMatrix::from_row_slice(3, 1, &[1.0, 2.0, -1.0]),
            response: DVector::from_column_slice(&[1.0, 2.0, -1.0]),
            covariate_names: vec!["x".into()],
            dates: vec![],
            split: Split::Test,
        };
        let coef = |v: f64| {
            Coefficients::new(DVector::from_element(1, v), crate::estimators::EstimatorKind::Ols, 0.0).unwrap()
        };
        assert_eq!(evaluate_r2(&coef(0.0), &test).unwrap(), 0.0);
        assert_eq!(evaluate_r2(&coef(1.0), &test).unwrap(), 1.0);
        assert_eq!(evaluate_r2(&coef(-1.0), &test).unwrap(), -3.0);
        let zero = ReturnDataset { response: DVector::zeros(3), ..test };
        assert!(matches!(evaluate_r2(&coef(1.0), &zero), Err(Error::DegenerateR2)));
    }

    #[test]
    fn split_is_by_boundary_dates() {
        let s = series("A", vec![1.0; 10]);
        let dates = SplitDates {
            train_end: NaiveDate::from_ymd_opt(2020, 1, 4).unwrap(),
            test_start: NaiveDate::from_ymd_opt(2020, 1, 7).unwrap(),
        };
        assert_eq!(split_series(std::slice::from_ref(&s), &dates, Split::Train)[0].closes.len(), 4);
        assert_eq!(split_series(&[s], &dates, Split::Test)[0].closes.len(), 4);
    }
}
