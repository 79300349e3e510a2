#![allow(dead_code)]

use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub const TICKERS: [&str; 5] = ["MSFT", "AAPL", "FB", "GOOGL", "AMZN"];

/// Weekdays from `start` through `end`.
pub fn trading_days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start
        .iter_days()
        .take_while(|d| *d <= end)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

/// Long-format price file for the five tickers: correlated geometric random
/// walks over the same span as the reference study, with an unused `open` column.
pub fn write_synthetic_prices(path: &Path, seed: u64) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let days = trading_days(NaiveDate::from_ymd_opt(2013, 2, 8).unwrap(), NaiveDate::from_ymd_opt(2018, 2, 7).unwrap());
    let mut out = String::from("date,open,close,symbol\n");
    let mut logp = [4.0, 4.5, 3.5, 6.0, 5.5];
    for d in &days {
        let market: f64 = StandardNormal.sample(&mut rng);
        for (k, t) in TICKERS.iter().enumerate() {
            let own: f64 = StandardNormal.sample(&mut rng);
            logp[k] += 0.0004 + 0.008 * market + 0.012 * own;
            let close = logp[k].exp();
            out.push_str(&format!("{d},{:.4},{:.4},{t}\n", close * 0.999, close));
        }
    }
    std::fs::write(path, out).unwrap();
}

/// Dataset CSV `x1..xp,y` with `y = X beta + noise_sd * z`.
pub fn write_dataset(path: &Path, n: usize, beta: &[f64], noise_sd: f64, seed: u64) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let p = beta.len();
    let mut out: String = (1..=p).map(|j| format!("x{j},")).collect();
    out.push_str("y\n");
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + noise_sd * z;
        for v in &x {
            out.push_str(&format!("{v:e},"));
        }
        out.push_str(&format!("{y:e}\n"));
    }
    std::fs::write(path, out).unwrap();
}
