//! Run configuration: the JSON config file, scenario presets and the
//! precedence rules the CLI applies on top of it.
//!
//! Config file schema (every field optional):
//!
//! ```json
//! {
//!   "input": "data/case09.csv",
//!   "column": "HR",
//!   "synth": { "seed": 1, "n": 6312, "base_bpm": 75.0, "drift_bpm_per_ks": 0.0,
//!              "modulation_amp": 5.0, "modulation_period_s": 240.0, "noise_std": 1.0 },
//!   "lags": [1, 2],
//!   "hidden": 10,
//!   "lm": { "mu_init": 0.001, "mu_increase": 10.0, "mu_decrease": 0.1, "mu_max": 1e10,
//!           "max_epochs": 1000, "gradient_tol": 1e-7, "step_tol": 1e-12 },
//!   "preset": "table4",
//!   "scenarios": ["30/35/35", [0.7, 0.15, 0.15]],
//!   "seed": 42,
//!   "max_fail": 6,
//!   "early_stopping": true,
//!   "out": "out",
//!   "plots": true,
//!   "parallel": false
//! }
//! ```
//!
//! `input` and `synth` are mutually exclusive.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::LmConfig;
use crate::series::{SplitSpec, SynthParams};

/// Environment variable overriding the built-in default seed.
pub const SEED_ENV: &str = "LM_FORECAST_SEED";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioEntry {
    Text(String),
    Fractions([f64; 3]),
}

impl ScenarioEntry {
    pub fn to_split(&self) -> Result<SplitSpec> {
        match self {
            ScenarioEntry::Text(s) => parse_scenario(s),
            ScenarioEntry::Fractions([a, b, c]) => split_from_triple(*a, *b, *c),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub column: Option<String>,
    pub synth: Option<SynthParams>,
    pub lags: Option<Vec<usize>>,
    pub hidden: Option<usize>,
    pub lm: Option<LmConfig>,
    pub preset: Option<String>,
    /// `Some(vec![])` with no preset is rejected by the CLI.
    pub scenarios: Option<Vec<ScenarioEntry>>,
    pub seed: Option<u64>,
    pub max_fail: Option<usize>,
    pub early_stopping: Option<bool>,
    pub out: Option<PathBuf>,
    pub plots: Option<bool>,
    pub parallel: Option<bool>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Every scenario requested through `preset` followed by `scenarios`.
    pub fn splits(&self) -> Result<Vec<SplitSpec>> {
        let mut out = match &self.preset {
            Some(p) => preset(p)?,
            None => Vec::new(),
        };
        for s in self.scenarios.iter().flatten() {
            out.push(s.to_split()?);
        }
        Ok(out)
    }
}

pub fn preset(name: &str) -> Result<Vec<SplitSpec>> {
    match name {
        "table4" => Ok(SplitSpec::table4()),
        "table7" => Ok(SplitSpec::table7()),
        other => Err(Error::Config(format!(
            "unknown preset {other:?} (expected table4 or table7)"
        ))),
    }
}

fn split_from_triple(a: f64, b: f64, c: f64) -> Result<SplitSpec> {
    let sum = a + b + c;
    if (sum - 100.0).abs() <= 1e-6 {
        SplitSpec::new(a / 100.0, b / 100.0, c / 100.0)
    } else {
        SplitSpec::new(a, b, c)
    }
}

/// Parses `a/b/c`, either as fractions summing to 1 or percentages summing
/// to 100.
pub fn parse_scenario(s: &str) -> Result<SplitSpec> {
    let parts: Vec<&str> = s.split('/').map(str::trim).collect();
    let bad = || Error::Config(format!("scenario {s:?} is not of the form a/b/c"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim_end_matches('%').parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    split_from_triple(nums[0], nums[1], nums[2])
}

/// Parses `1,2,5` or `1-4` (inclusive range) into a lag list.
pub fn parse_lags(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("lags {s:?} must look like 1,2 or 1-4"));
    if let Some((a, b)) = s.split_once('-') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a == 0 || b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect()
}

/// Flag beats environment, environment beats config file, config file beats
/// the built-in default.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(e) = env {
        return e
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={e:?} is not an unsigned integer")));
    }
    Ok(file.unwrap_or(DEFAULT_SEED))
}
