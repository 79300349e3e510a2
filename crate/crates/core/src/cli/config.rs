//! Layered settings: built-in defaults, then an optional TOML file, then flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use clap::{Arg, ArgMatches, Command};

use crate::covariance::ShrinkageParams;
use crate::error::{Error, Result};
use crate::linalg::logspace;

/// A setting accepted both as `--key VALUE` and as `key = VALUE` in a config file.
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

pub fn add_keys(mut cmd: Command, keys: &'static [Key]) -> Command {
    for k in keys {
        let help =
            if k.default.is_empty() { k.help.to_string() } else { format!("{} [default: {}]", k.help, k.default) };
        cmd = cmd.arg(Arg::new(k.name).long(k.name).value_name("VALUE").allow_negative_numbers(true).help(help));
    }
    cmd.arg(Arg::new("config").long("config").value_name("FILE").help("TOML file whose keys mirror the flag names"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn toml_to_string(name: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => {
            items.iter().map(|i| toml_to_string(name, i)).collect::<Result<Vec<_>>>()?.join(",")
        }
        _ => return Err(Error::InvalidParameter(format!("config key {name:?} has an unsupported value type"))),
    })
}

impl Settings {
    pub fn resolve(keys: &[Key], matches: &ArgMatches) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            keys.iter().map(|k| (k.name.to_string(), k.default.to_string())).collect();
        if let Some(path) = matches.get_one::<String>("config") {
            let path = Path::new(path);
            if !path.exists() {
                return Err(Error::FileNotFound(path.display().to_string()));
            }
            let text = std::fs::read_to_string(path)?;
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("config file: {e}")))?;
            for (name, v) in &table {
                let slot = values
                    .get_mut(name.as_str())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown config key {name:?}")))?;
                *slot = toml_to_string(name, v)?;
            }
        }
        for k in keys {
            if let Some(v) = matches.get_one::<String>(k.name) {
                values.insert(k.name.to_string(), v.clone());
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, name: &str) -> &str {
        self.values.get(name).map(String::as_str).unwrap_or("")
    }

    pub fn opt(&self, name: &str) -> Option<&str> {
        Some(self.get(name)).filter(|v| !v.is_empty())
    }

    pub fn parse<T: FromStr>(&self, name: &str) -> Result<T> {
        let raw = self.get(name);
        raw.parse().map_err(|_| Error::InvalidParameter(format!("invalid value for {name}: {raw:?}")))
    }

    pub fn parse_opt<T: FromStr>(&self, name: &str) -> Result<Option<T>> {
        self.opt(name).map(|_| self.parse(name)).transpose()
    }

    /// Replaces a value after resolution, e.g. to record a study-dependent default.
    pub fn set(&mut self, name: &str, value: String) {
        self.values.insert(name.to_string(), value);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.values).expect("string map serializes")
    }
}

/// Comma-separated values; an item `log:a:b:k` expands to `k` points from `10^a` to `10^b`.
pub fn parse_lambda_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("invalid lambda grid {text:?}"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(rest) = item.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = parts[0].parse().map_err(|_| bad())?;
            let hi: f64 = parts[1].parse().map_err(|_| bad())?;
            let k: usize = parts[2].parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            out.extend(logspace(lo, hi, k));
        } else {
            out.push(item.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    if let Some(l) = out.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidPenalty(*l));
    }
    Ok(out)
}

/// `full` (6x6), `diagonal` (mu = kappa) or a list of `kappa:mu` pairs.
pub fn parse_shrink_grid(text: &str) -> Result<Vec<ShrinkageParams>> {
    match text.trim() {
        "full" => Ok(ShrinkageParams::default_grid()),
        "diagonal" => Ok(ShrinkageParams::diagonal_grid()),
        list => {
            let bad = || Error::InvalidParameter(format!("invalid shrinkage grid {text:?}"));
            let grid = list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|pair| {
                    let (k, m) = pair.split_once(':').ok_or_else(bad)?;
                    ShrinkageParams::new(k.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
                })
                .collect::<Result<Vec<_>>>()?;
            if grid.is_empty() {
                return Err(bad());
            }
            Ok(grid)
        }
    }
}

pub fn parse_list(text: &str) -> Vec<String> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect()
}
