//! Layered run configuration: command-line flags override the optional JSON
//! config file, which overrides the built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

/// Optional values loaded from `--config <file>`. Field names match the
/// long flag names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub jumps: Option<usize>,
    pub trajectories: Option<usize>,
    pub dt: Option<f64>,
    pub tau_max: Option<f64>,
    pub grid: Option<usize>,
    pub periods: Option<f64>,
    pub mode: Option<String>,
    pub strategy: Option<String>,
    pub format: Option<String>,
    pub out_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config file {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config file {}", p.display()))
            }
        }
    }
}

/// Resolve one setting: flag beats config file beats default.
pub fn resolve<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like [`resolve`] but without a default; errors if neither source set it.
pub fn require<T: Clone>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .with_context(|| format!("missing required setting `{name}` (flag or config file)"))
}

/// Parallelism cap for sweeps: `ANTIBUNCH_THREADS` when set, otherwise the
/// machine's available parallelism.
pub fn thread_cap() -> Result<usize> {
    match std::env::var("ANTIBUNCH_THREADS") {
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
        Ok(raw) => {
            let n: usize = raw.parse().with_context(|| {
                format!("ANTIBUNCH_THREADS must be a positive integer, got `{raw}`")
            })?;
            anyhow::ensure!(n >= 1, "ANTIBUNCH_THREADS must be at least 1");
            Ok(n)
        }
    }
}

/// Run closures concurrently in waves of at most `cap` threads, preserving
/// input order in the results.
pub fn run_capped<T, F>(tasks: Vec<F>, cap: usize) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let cap = cap.max(1);
    let mut out = Vec::with_capacity(tasks.len());
    let mut iter = tasks.into_iter();
    loop {
        let wave: Vec<F> = iter.by_ref().take(cap).collect();
        if wave.is_empty() {
            break;
        }
        let results: Vec<T> = std::thread::scope(|scope| {
            let handles: Vec<_> = wave.into_iter().map(|f| scope.spawn(f)).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker thread panicked"))
                .collect()
        });
        out.extend(results);
    }
    out
}
