//! Command-line front end. Every run writes its resolved settings and an
//! audit sidecar next to the outputs; failures print one machine-readable
//! line and exit with 2 (validation), 3 (data) or 4 (numerical).

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::Path;

use clap::Command;
use serde_json::json;

use crate::error::{Error, ErrorClass, Result};
use config::{add_keys, Key, Settings};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "TWOREG_WORKERS";

type Handler = fn(&mut Settings) -> Result<Vec<String>>;

const SUBCOMMANDS: &[(&str, &str, &[Key], Handler)] = &[
    (
        "simulate",
        "Monte Carlo comparison of OLS, ridge and two-stage ridge",
        commands::SIMULATE_KEYS,
        commands::simulate,
    ),
    ("cov", "Estimate, shrink and normalize the OLS coefficient covariance", commands::COV_KEYS, commands::cov),
    ("realdata", "Out-of-sample r2 curves for stock return forecasts", commands::REALDATA_KEYS, commands::realdata),
    ("fit", "Fit one estimator to a dataset", commands::FIT_KEYS, commands::fit),
];

fn app() -> Command {
    let mut cmd = Command::new("tworeg")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Two-stage ridge regression under serially dependent noise")
        .subcommand_required(true)
        .arg(
            clap::Arg::new("workers")
                .long("workers")
                .global(true)
                .value_name("N")
                .help(format!("worker threads [env: {WORKERS_ENV}]")),
        );
    for (name, about, keys, _) in SUBCOMMANDS {
        cmd = cmd.subcommand(add_keys(Command::new(*name).about(*about), keys));
    }
    cmd
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Validation => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn report(kind: &str, code: i32, message: &str) {
    let flat = message.replace(['\n', '\r'], " ").replace('"', "'");
    eprintln!("error kind={kind} code={code} message=\"{flat}\"");
}

fn workers(matches: &clap::ArgMatches) -> Result<Option<usize>> {
    let raw = match matches.get_one::<String>("workers") {
        Some(v) => Some(v.clone()),
        None => std::env::var(WORKERS_ENV).ok().filter(|v| !v.is_empty()),
    };
    raw.map(|v| {
        v.parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("invalid worker count {v:?}")))
    })
    .transpose()
}

fn write_audit(dir: &Path, command: &str, files: &[String], workers: usize) -> Result<()> {
    let audit = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "workers": workers,
        "outputs": files,
    });
    std::fs::write(dir.join("audit.json"), format!("{audit:#}\n"))?;
    Ok(())
}

fn execute(name: &str, keys: &[Key], handler: Handler, sub: &clap::ArgMatches, threads: Option<usize>) -> Result<()> {
    let mut settings = Settings::resolve(keys, sub)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let files = pool.install(|| handler(&mut settings))?;
    let dir = commands::out_dir(&settings)?;
    std::fs::write(dir.join("config.resolved.toml"), settings.to_toml())?;
    write_audit(&dir, name, &files, pool.current_num_threads())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match app().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            report("usage", 2, first);
            return 2;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let (_, _, keys, handler) = SUBCOMMANDS.iter().find(|c| c.0 == name).expect("known subcommand");
    let result = workers(&matches).and_then(|t| execute(name, keys, *handler, sub, t));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(e.class());
            report(e.kind(), code, &e.to_string());
            code
        }
    }
}
