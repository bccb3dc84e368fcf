//! Output directory bookkeeping: artifacts, timings and the run manifest.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use shellspec_core::BoundaryOperator;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
struct Versions {
    shellspec_cli: &'static str,
    shellspec_core: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    exit_code: i32,
    status: &'a str,
    failures: &'a [String],
    error: Option<String>,
    config_hash: String,
    seed: u64,
    threads: usize,
    versions: Versions,
    started_unix: u64,
    total_seconds: f64,
    timings: &'a [Timing],
    files: &'a [String],
    config: &'a RunConfig,
}

/// Outcome of a command that ran to completion.
#[derive(Clone, Debug, Default)]
pub struct Verdict {
    pub failures: Vec<String>,
}

impl Verdict {
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub struct Run {
    pub command: &'static str,
    pub out: PathBuf,
    files: Vec<String>,
    timings: Vec<Timing>,
    start: Instant,
    started_unix: u64,
}

impl Run {
    pub fn new(command: &'static str, out: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out)?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Ok(Self {
            command,
            out,
            files: Vec::new(),
            timings: Vec::new(),
            start: Instant::now(),
            started_unix,
        })
    }

    pub fn time<T>(&mut self, phase: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        let phase = phase.into();
        let seconds = t.elapsed().as_secs_f64();
        log::info!("{phase}: {seconds:.2} s");
        self.timings.push(Timing { phase, seconds });
        v
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.out.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
        self.write(name, &text)
    }

    pub fn dump(&mut self, name: &str, op: &BoundaryOperator) -> Result<(), CliError> {
        op.dump(&self.out.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes the resolved config and the manifest.
    pub fn finish(mut self, cfg: &RunConfig, exit_code: i32, failures: &[String], error: Option<String>) -> Result<(), CliError> {
        self.write("config.resolved.toml", &cfg.to_toml())?;
        let status = match exit_code {
            0 => "pass",
            2 => "fail",
            3 => "refused",
            _ => "error",
        };
        self.files.push("manifest.json".into());
        let manifest = Manifest {
            command: self.command,
            exit_code,
            status,
            failures,
            error,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            threads: rayon::current_num_threads(),
            versions: Versions {
                shellspec_cli: env!("CARGO_PKG_VERSION"),
                shellspec_core: shellspec_core::VERSION,
            },
            started_unix: self.started_unix,
            total_seconds: self.start.elapsed().as_secs_f64(),
            timings: &self.timings,
            files: &self.files,
            config: cfg,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.into()))?;
        std::fs::write(self.out.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Minimal Markdown table.
pub fn markdown_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
    for r in rows {
        s.push_str(&format!("| {} |\n", r.join(" | ")));
    }
    s
}

pub fn sci(v: f64) -> String {
    format!("{v:.3e}")
}
