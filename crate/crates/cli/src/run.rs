//! Executes one experiment and writes its artifacts:
//! `<kind>.csv`, optionally `<kind>.json`, `manifest.json` and `timing.json`.
//! Everything except `timing.json` is a function of the configuration alone.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, ExperimentConfig};
use crate::experiments::{compute, Artifact, Check};

pub const TOOL: &str = "latthom";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("computation failed: {0}")]
    Compute(latthom::Error),
}

impl RunError {
    /// 2 for configuration and output-path problems, 3 for internal failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Output { .. } => 2,
            Self::Compute(_) => 3,
        }
    }
}

impl From<latthom::Error> for RunError {
    fn from(e: latthom::Error) -> Self {
        match e {
            latthom::Error::Config { field, reason } => Self::Config(ConfigError::new(field, reason)),
            other => Self::Compute(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub verdicts: Vec<Check>,
    pub pass: bool,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    /// 0 when every verdict passes, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        u8::from(!self.pass)
    }
}

fn header(cfg: &ExperimentConfig) -> String {
    let mut s = format!("# tool={TOOL} {VERSION}\n# config_hash={}\n", cfg.hash());
    for line in cfg.canonical().lines() {
        let (k, v) = line.split_once(" = ").expect("canonical form");
        s.push_str(&format!("# {k}={v}\n"));
    }
    s
}

pub fn render_csv(cfg: &ExperimentConfig, a: &Artifact) -> String {
    let mut s = header(cfg);
    s.push_str(&a.columns.join(","));
    s.push('\n');
    for row in &a.rows {
        let cells: Vec<String> = row.iter().map(|c| c.render()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Output { path: path.to_path_buf(), source })
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifacts serialize");
    s.push('\n');
    s
}

/// Runs `cfg` and writes its artifacts into `out`, creating it if needed.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest, RunError> {
    fs::create_dir_all(out).map_err(|source| RunError::Output { path: out.to_path_buf(), source })?;
    let start = Instant::now();
    let artifact = compute(cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let kind = cfg.kind.name();
    let mut files = vec![format!("{kind}.csv")];
    write(&out.join(&files[0]), &render_csv(cfg, &artifact))?;
    if let Some(body) = &artifact.json {
        let name = format!("{kind}.json");
        let doc = json!({ "kind": kind, "seed": cfg.seed, "config": cfg.values(), "data": body });
        write(&out.join(&name), &pretty(&doc))?;
        files.push(name);
    }
    let manifest = RunManifest {
        tool: TOOL,
        version: VERSION,
        kind: kind.to_string(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        config: cfg.values().clone(),
        pass: artifact.checks.iter().all(|c| c.pass),
        verdicts: artifact.checks,
        artifacts: files,
    };
    write(&out.join("manifest.json"), &pretty(&manifest))?;
    write(&out.join("timing.json"), &pretty(&json!({ "wall_seconds": wall })))?;
    Ok(manifest)
}
