//! `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Grids are comma separated
//! and come back sorted ascending without duplicates. Command-line flags feed
//! the same parser, so a flag and a config line are interchangeable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use polyperc_core::Direction;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "POLYPERC_OUT";
pub const DEFAULT_OUT: &str = "polyperc-out";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("`{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("cannot read {path}: {msg}")]
    Read { path: String, msg: String },
}

/// One `key = value` assignment and where it came from (line 0 for flags).
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub const KEYS: &[&str] = &[
    "experiment",
    "mode",
    "d",
    "L",
    "p",
    "beta",
    "alpha",
    "eps",
    "n",
    "m",
    "k",
    "r",
    "law",
    "axes",
    "samples",
    "env_samples",
    "cluster_samples",
    "max_attempts",
    "seed",
    "out",
    "tilt.j",
    "tilt.base",
    "tilt.delta",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Option<String>,
    pub mode: Option<String>,
    pub d: usize,
    /// Box radius: the box is `[-L, L]^d`.
    pub radius: usize,
    pub p: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    /// Exit-time half widths `K`.
    pub k: Vec<usize>,
    /// Heat-kernel target distances along the first axis.
    pub r: Vec<usize>,
    pub law: String,
    /// `all` or a list such as `+e1,-e2`.
    pub axes: String,
    pub samples: usize,
    pub env_samples: usize,
    pub cluster_samples: usize,
    pub max_attempts: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub tilt_j: Option<usize>,
    pub tilt_base: Option<Vec<i64>>,
    pub tilt_delta: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            mode: None,
            d: 3,
            radius: 12,
            p: vec![0.6],
            beta: vec![0.5],
            alpha: vec![0.5],
            eps: vec![0.3],
            n: vec![10],
            m: vec![2],
            k: vec![10, 14, 18, 22],
            r: vec![0, 2, 4],
            law: "gaussian".into(),
            axes: "+e1".into(),
            samples: 1000,
            env_samples: 1000,
            cluster_samples: 1,
            max_attempts: 10_000,
            seed: 0,
            out: default_out(),
            tilt_j: None,
            tilt_base: None,
            tilt_delta: None,
        }
    }
}

fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected `key = value`, found `{body}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                msg: "empty key or value".into(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("unknown key `{key}`"),
            });
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("`{key}` already set on line {}", prev.line),
            });
        }
        entries.push(Entry {
            key: key.into(),
            value: value.into(),
            line,
        });
    }
    Ok(entries)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    RunConfig::from_entries(&parse_entries(&text)?)
}

fn value_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.into(),
        msg: msg.into(),
    }
}

fn scalar<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| value_err(key, format!("cannot parse `{v}`")))
}

fn grid<T: std::str::FromStr + PartialOrd + Copy>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    let mut xs = v
        .split(',')
        .map(|s| scalar(key, s.trim()))
        .collect::<Result<Vec<T>, _>>()?;
    xs.sort_by(|a, b| a.partial_cmp(b).expect("parsed values are ordered"));
    xs.dedup_by(|a, b| a == b);
    Ok(xs)
}

fn finite_grid(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let xs: Vec<f64> = grid(key, v)?;
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(value_err(key, "values must be finite"));
    }
    Ok(xs)
}

fn positive(key: &str, x: usize) -> Result<usize, ConfigError> {
    if x == 0 {
        return Err(value_err(key, "must be at least 1"));
    }
    Ok(x)
}

fn parse_axes(v: &str, d: usize) -> Result<Vec<Direction>, ConfigError> {
    if v == "all" {
        return Ok(Direction::all(d));
    }
    let mut dirs = Vec::new();
    for s in v.split(',') {
        let dir =
            Direction::parse(s.trim()).ok_or_else(|| value_err("axes", format!("cannot parse `{}`", s.trim())))?;
        if dir.axis >= d {
            return Err(value_err("axes", format!("`{}` needs d > {}", s.trim(), dir.axis)));
        }
        if !dirs.contains(&dir) {
            dirs.push(dir);
        }
    }
    Ok(dirs)
}

impl RunConfig {
    /// Applies `entries` on top of the defaults, in order; later entries win.
    pub fn from_entries(entries: &[Entry]) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply(entries)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, entries: &[Entry]) -> Result<(), ConfigError> {
        for e in entries {
            self.set(&e.key, &e.value)?;
        }
        self.validate()
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "experiment" => self.experiment = Some(v.into()),
            "mode" => self.mode = Some(v.into()),
            "d" => self.d = scalar(key, v)?,
            "L" => self.radius = scalar(key, v)?,
            "p" => self.p = finite_grid(key, v)?,
            "beta" => self.beta = finite_grid(key, v)?,
            "alpha" => self.alpha = finite_grid(key, v)?,
            "eps" => self.eps = finite_grid(key, v)?,
            "n" => self.n = grid(key, v)?,
            "m" => self.m = grid(key, v)?,
            "k" => self.k = grid(key, v)?,
            "r" => self.r = grid(key, v)?,
            "law" => self.law = v.into(),
            "axes" => self.axes = v.into(),
            "samples" => self.samples = positive(key, scalar(key, v)?)?,
            "env_samples" => self.env_samples = positive(key, scalar(key, v)?)?,
            "cluster_samples" => self.cluster_samples = positive(key, scalar(key, v)?)?,
            "max_attempts" => self.max_attempts = positive(key, scalar(key, v)?)? as u64,
            "seed" => self.seed = scalar(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "tilt.j" => self.tilt_j = Some(scalar(key, v)?),
            "tilt.base" => {
                let base = v
                    .split(',')
                    .map(|s| scalar(key, s.trim()))
                    .collect::<Result<Vec<i64>, _>>()?;
                self.tilt_base = Some(base);
            }
            "tilt.delta" => {
                let delta: f64 = scalar(key, v)?;
                if !(delta.is_finite() && delta >= 0.0) {
                    return Err(value_err(key, format!("{delta} is not a finite non-negative number")));
                }
                self.tilt_delta = Some(delta);
            }
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=8).contains(&self.d) {
            return Err(value_err("d", format!("{} is not in 1..=8", self.d)));
        }
        positive("L", self.radius)?;
        if let Some(p) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(value_err("p", format!("{p} is not in [0, 1]")));
        }
        if let Some(b) = self.beta.iter().find(|b| **b < 0.0) {
            return Err(value_err("beta", format!("{b} is negative")));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(value_err("alpha", format!("{a} is not in (0, 1)")));
        }
        if let Some(e) = self.eps.iter().find(|e| **e <= 0.0) {
            return Err(value_err("eps", format!("{e} is not positive")));
        }
        if self.m.contains(&0) {
            return Err(value_err("m", "tube lengths must be at least 1"));
        }
        if self.k.contains(&0) {
            return Err(value_err("k", "half widths must be at least 1"));
        }
        if polyperc_core::disorder::law_by_name(&self.law).is_err() {
            return Err(value_err(
                "law",
                format!("unknown law `{}` (gaussian, rademacher)", self.law),
            ));
        }
        parse_axes(&self.axes, self.d)?;
        if let Some(base) = &self.tilt_base {
            if base.len() != self.d {
                return Err(value_err(
                    "tilt.base",
                    format!("{} coordinates for d = {}", base.len(), self.d),
                ));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` rendering of every key except `out`; two
    /// configurations producing the same data have the same echo.
    pub fn echo(&self) -> String {
        fn list<T: ToString>(xs: &[T]) -> String {
            xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("experiment", self.experiment.clone().unwrap_or_default());
        kv("mode", self.mode.clone().unwrap_or_default());
        kv("d", self.d.to_string());
        kv("L", self.radius.to_string());
        kv("p", list(&self.p));
        kv("beta", list(&self.beta));
        kv("alpha", list(&self.alpha));
        kv("eps", list(&self.eps));
        kv("n", list(&self.n));
        kv("m", list(&self.m));
        kv("k", list(&self.k));
        kv("r", list(&self.r));
        kv("law", self.law.clone());
        kv(
            "axes",
            list(&self.directions().iter().map(|a| a.label()).collect::<Vec<_>>()),
        );
        kv("samples", self.samples.to_string());
        kv("env_samples", self.env_samples.to_string());
        kv("cluster_samples", self.cluster_samples.to_string());
        kv("max_attempts", self.max_attempts.to_string());
        kv("seed", self.seed.to_string());
        if let Some(j) = self.tilt_j {
            kv("tilt.j", j.to_string());
        }
        if let Some(b) = &self.tilt_base {
            kv("tilt.base", list(b));
        }
        if let Some(delta) = self.tilt_delta {
            kv("tilt.delta", delta.to_string());
        }
        s
    }

    pub fn directions(&self) -> Vec<Direction> {
        parse_axes(&self.axes, self.d).expect("validated")
    }
}
