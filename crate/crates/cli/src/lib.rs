//! Configuration-driven runner for the `mvsde-core` experiments.
//!
//! A config file is a list of `section.key = value` lines (`#` starts a comment). Every run
//! writes its CSVs and a manifest holding the fully resolved config, which re-runs to identical
//! output.

pub mod build;
pub mod config;
pub mod error;
pub mod tasks;

use std::fs;
use std::path::{Path, PathBuf};

pub use error::CliError;
pub use tasks::{Outcome, Plan};

use config::{RawConfig, Resolver};

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn load(path: &Path, opts: &Options) -> Result<Plan, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    load_str(&text, opts)
}

pub fn load_str(text: &str, opts: &Options) -> Result<Plan, CliError> {
    let mut raw = RawConfig::parse(text)?;
    if let Some(out) = &opts.out {
        raw.set("output.dir", &out.to_string_lossy());
    }
    tasks::resolve(Resolver::new(raw))
}

/// Schema and invariant checks only; returns the resolved config.
pub fn validate(path: &Path, opts: &Options) -> Result<String, CliError> {
    Ok(load(path, opts)?.resolved)
}

/// Runs the task on a pool of `opts.workers` threads (rayon's default when unset).
pub fn run(path: &Path, opts: &Options) -> Result<Outcome, CliError> {
    let plan = load(path, opts)?;
    run_plan(&plan, opts.workers)
}

pub fn run_plan(plan: &Plan, workers: Option<usize>) -> Result<Outcome, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Config("worker count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Numerical(format!("cannot start worker pool: {e}")))?;
    pool.install(|| tasks::execute(plan))
}
