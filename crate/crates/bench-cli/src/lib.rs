//! Experiment runner and reporter for the steering toolkit.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eulerctl_core::dynamics::DynamicsError;
use serde::{Deserialize, Serialize};

pub mod config;
pub mod criteria;
pub mod experiments;
pub mod report;

pub use config::{load_config, parse_config, ExperimentConfig, LoadedConfig};
pub use criteria::{verdicts, Verdict};
pub use experiments::{run_experiment, Artifacts, Results, Table};

/// Environment variable under which relative output directories are resolved.
pub const OUTPUT_ROOT_VAR: &str = "EULERCTL_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("missing or corrupt artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BenchError {
    /// Process exit code: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<DynamicsError> for BenchError {
    fn from(e: DynamicsError) -> Self {
        BenchError::Compute(e.to_string())
    }
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub experiment: String,
    pub config_digest: String,
    pub seed: u64,
    pub prng: Option<String>,
    pub float_env: String,
    pub runtime_seconds: f64,
    pub tables: Vec<String>,
    pub results: Results,
}

/// Output directory: the explicit override, else the config's `output`, else
/// `runs/<kind>`; relative paths are taken under `$EULERCTL_OUTPUT_ROOT` when set.
pub fn output_dir(config: &ExperimentConfig, overridden: Option<&Path>) -> PathBuf {
    let dir = overridden
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| Path::new("runs").join(config.experiment.name()));
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir,
    }
}

/// Runs the experiment and writes its artifacts under `out`. Nothing but
/// `error.json` is written when the computation fails.
pub fn run(loaded: &LoadedConfig, out: &Path, jobs: usize) -> Result<Summary, BenchError> {
    let cfg = &loaded.config;
    let start = Instant::now();
    log::info!("running {} ({})", cfg.experiment.name(), &loaded.digest[..12]);
    let artifacts = match run_experiment(&cfg.experiment, cfg.seed, jobs) {
        Ok(a) => a,
        Err(e) => {
            fs::create_dir_all(out)?;
            let doc = serde_json::json!({
                "experiment": cfg.experiment.name(),
                "config_digest": loaded.digest,
                "error": e.to_string(),
            });
            fs::write(out.join("error.json"), serde_json::to_string_pretty(&doc).expect("plain json"))?;
            return Err(e);
        }
    };
    let summary = Summary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.name().to_string(),
        config_digest: loaded.digest.clone(),
        seed: cfg.seed,
        prng: artifacts.prng.map(str::to_string),
        float_env: cfg.float_env.clone(),
        runtime_seconds: start.elapsed().as_secs_f64(),
        tables: artifacts.tables.iter().map(|t| format!("{}.csv", t.name)).collect(),
        results: artifacts.results.clone(),
    };
    write_artifacts(out, loaded, &artifacts, &summary)?;
    Ok(summary)
}

fn write_artifacts(out: &Path, loaded: &LoadedConfig, a: &Artifacts, summary: &Summary) -> Result<(), BenchError> {
    // render everything first so a failure leaves nothing behind
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    for t in &a.tables {
        files.push((out.join(format!("{}.csv", t.name)), t.to_csv()?));
    }
    for (name, body) in &a.documents {
        files.push((out.join(name), body.clone()));
    }
    files.push((out.join("config.json"), loaded.canonical.clone()));
    files.push((
        out.join("summary.json"),
        serde_json::to_string_pretty(summary).expect("summary serializes"),
    ));
    fs::create_dir_all(out)?;
    let stale = out.join("error.json");
    if stale.exists() {
        fs::remove_file(stale)?;
    }
    for (path, body) in files {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, body)?;
    }
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<Summary, BenchError> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| BenchError::Artifact(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Artifact(format!("{}: {e}", path.display())))
}
