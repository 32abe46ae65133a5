//! Command-line arguments. Every override flag maps one-for-one onto a
//! configuration key and goes through the same parser as a config file.

use std::path::PathBuf;

use clap::Parser;

use crate::config::{load_config, ConfigError, Entry, RunConfig};
use crate::experiments::RunError;

pub const COMMANDS: &[&str] = &[
    "percolate",
    "tubes",
    "walk",
    "polymer",
    "com",
    "selftest",
    "run",
    "list",
];

#[derive(Debug, Parser)]
#[command(
    name = "polyperc",
    version,
    about = "Directed polymers on supercritical percolation clusters"
)]
pub struct Cli {
    /// Experiment to run; `run` takes it from the config file, `list` prints the registry.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(COMMANDS))]
    pub command: String,

    /// `key = value` configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,

    /// Any other key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub d: Option<String>,
    /// Box radius.
    #[arg(long = "L")]
    pub radius: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub axes: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long = "env-samples")]
    pub env_samples: Option<String>,
    #[arg(long = "cluster-samples")]
    pub cluster_samples: Option<String>,
    #[arg(long = "max-attempts")]
    pub max_attempts: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long = "tilt-j")]
    pub tilt_j: Option<String>,
    #[arg(long = "tilt-base", allow_hyphen_values = true)]
    pub tilt_base: Option<String>,
    #[arg(long = "tilt-delta")]
    pub tilt_delta: Option<String>,
}

impl Overrides {
    pub fn entries(&self) -> Vec<Entry> {
        let pairs = [
            ("mode", &self.mode),
            ("d", &self.d),
            ("L", &self.radius),
            ("p", &self.p),
            ("beta", &self.beta),
            ("alpha", &self.alpha),
            ("eps", &self.eps),
            ("n", &self.n),
            ("m", &self.m),
            ("k", &self.k),
            ("r", &self.r),
            ("law", &self.law),
            ("axes", &self.axes),
            ("samples", &self.samples),
            ("env_samples", &self.env_samples),
            ("cluster_samples", &self.cluster_samples),
            ("max_attempts", &self.max_attempts),
            ("seed", &self.seed),
            ("out", &self.out),
            ("tilt.j", &self.tilt_j),
            ("tilt.base", &self.tilt_base),
            ("tilt.delta", &self.tilt_delta),
        ];
        pairs
            .into_iter()
            .filter_map(|(key, v)| {
                v.as_ref().map(|value| Entry {
                    key: key.into(),
                    value: value.clone(),
                    line: 0,
                })
            })
            .collect()
    }
}

fn usage(e: ConfigError) -> RunError {
    RunError::Usage(e.to_string())
}

impl Cli {
    /// Config file, then `--set` pairs, then the named flags.
    pub fn resolve(&self) -> Result<RunConfig, RunError> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path).map_err(usage)?,
            None => RunConfig::default(),
        };
        let mut entries = Vec::new();
        for kv in &self.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| RunError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            let key = key.trim();
            if !crate::config::KEYS.contains(&key) {
                return Err(usage(ConfigError::UnknownKey(key.into())));
            }
            entries.push(Entry {
                key: key.into(),
                value: value.trim().into(),
                line: 0,
            });
        }
        entries.extend(self.overrides.entries());
        cfg.apply(&entries).map_err(usage)?;
        match (self.command.as_str(), cfg.experiment.as_deref()) {
            ("run", None) => return Err(RunError::Usage("`run` needs `experiment` in the config".into())),
            ("run", Some(_)) => {}
            (cmd, Some(e)) if e != cmd => {
                return Err(RunError::Usage(format!(
                    "command `{cmd}` conflicts with `experiment = {e}` in the config"
                )))
            }
            (cmd, _) => cfg.experiment = Some(cmd.into()),
        }
        Ok(cfg)
    }
}
