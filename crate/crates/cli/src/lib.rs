//! Experiment runner for directed polymers on percolation clusters.
//!
//! A run is `experiment + mode + RunConfig`. Outputs are CSV or line-oriented
//! text, collected in memory and written once into the output directory
//! together with `manifest.txt`, which echoes the resolved configuration and
//! lists a SHA-256 per output file.

pub mod args;
pub mod config;
pub mod experiments;
pub mod manifest;
pub mod selftest;

use std::path::PathBuf;

use config::RunConfig;
use experiments::{find, RunError, Status, REGISTRY};
use manifest::{unix_now, Outputs, RunManifest};

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub experiment: &'static str,
    pub mode: &'static str,
    pub out_dir: PathBuf,
    pub checksums: Vec<(String, String)>,
}

/// Runs the configured experiment and writes its outputs and manifest.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let name = cfg
        .experiment
        .as_deref()
        .ok_or_else(|| RunError::Usage("no experiment given".into()))?;
    let exp = find(name).ok_or_else(|| {
        let known: Vec<&str> = REGISTRY.iter().map(|e| e.name()).collect();
        RunError::Usage(format!("unknown experiment `{name}` (one of {})", known.join(", ")))
    })?;
    let mode = match cfg.mode.as_deref() {
        None => exp.modes()[0],
        Some(m) => exp.modes().iter().copied().find(|k| *k == m).ok_or_else(|| {
            RunError::Usage(format!(
                "`{name}` has no mode `{m}` (one of {})",
                exp.modes().join(", ")
            ))
        })?,
    };
    let mut resolved = cfg.clone();
    resolved.experiment = Some(exp.name().into());
    resolved.mode = Some(mode.into());

    let started = unix_now();
    let mut out = Outputs::default();
    let status = exp.run(&resolved, mode, &mut out)?;
    let io_err = |e: std::io::Error| RunError::Failed(format!("writing to {}: {e}", cfg.out.display()));
    let checksums = out.write_all(&cfg.out).map_err(io_err)?;
    RunManifest {
        experiment: exp.name().into(),
        config_echo: resolved.echo(),
        version: env!("CARGO_PKG_VERSION"),
        started,
        finished: unix_now(),
        checksums: checksums.clone(),
    }
    .write(&cfg.out)
    .map_err(io_err)?;
    match status {
        Status::Done => Ok(RunSummary {
            experiment: exp.name(),
            mode,
            out_dir: cfg.out.clone(),
            checksums,
        }),
        Status::ChecksFailed(k) => Err(RunError::Failed(format!("{k} check(s) failed"))),
    }
}
