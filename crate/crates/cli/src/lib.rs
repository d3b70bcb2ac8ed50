//! Batch front end: reads a run configuration, runs the replication grid or
//! the Monte Carlo scenarios, and writes tables, summaries and a manifest.

pub mod config;
pub mod error;
pub mod montecarlo;
pub mod output;
pub mod replicate;

use std::path::PathBuf;
use std::time::Instant;

pub use config::{parse_config, Mode, OutputFormat, Overrides, ResolvedConfig};
pub use error::{CliError, Result};

use output::{write_atomic, Manifest, Timing};

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Runs a resolved configuration on its own thread pool.
///
/// In replicate mode the tables and manifest are written even when too many
/// cells failed; the error is returned afterwards.
pub fn execute(r: &ResolvedConfig, arguments: Vec<String>) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(r.config.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", r.config.threads)))?;
    pool.install(|| execute_on_pool(r, arguments))
}

fn execute_on_pool(r: &ResolvedConfig, arguments: Vec<String>) -> Result<RunReport> {
    let start = Instant::now();
    let out = &r.config.out;
    let echo = r.echo();
    let echo_path = out.join("config.resolved.toml");
    write_atomic(&echo_path, echo.as_bytes())?;
    let mut outputs = vec![echo_path];
    let mut timings = Vec::new();
    let mut skipped = Vec::new();
    let mut failed_cells = None;
    let mut deferred = None;
    match r.mode {
        Mode::Replicate => {
            let t = Instant::now();
            let rep = replicate::run_replication(r)?;
            timings.push(Timing {
                stage: "estimation".into(),
                seconds: t.elapsed().as_secs_f64(),
            });
            outputs.extend(rep.write(r, out)?);
            skipped = rep.skipped.clone();
            failed_cells = Some((rep.failed_cells, rep.total_cells));
            deferred = replicate::check_failures(&rep, r.model().failure_tolerance).err();
        }
        Mode::Montecarlo => {
            let run = montecarlo::run_montecarlo(r)?;
            timings = run.timings.clone();
            outputs.extend(montecarlo::write_summaries(&run, r, out)?);
        }
    }
    let manifest = Manifest {
        tool: "hetiv",
        version: env!("CARGO_PKG_VERSION"),
        core_version: hetiv::VERSION,
        mode: r.mode.to_string(),
        arguments,
        threads: rayon::current_num_threads(),
        config_echo: echo,
        defaulted: r.defaulted.clone(),
        overridden: r.overridden.clone(),
        timings,
        total_seconds: start.elapsed().as_secs_f64(),
        outputs: outputs.clone(),
        skipped,
        failed_cells,
    };
    let manifest_path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&manifest_path, text.as_bytes())?;
    match deferred {
        Some(e) => Err(e),
        None => Ok(RunReport {
            outputs,
            manifest: manifest_path,
        }),
    }
}
