//! Experiment configuration: a JSON file, overridden field by field from the
//! command line, then completed with per-command defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

/// A grid given either as a JSON array or as text: `2,4,8` or the geometric
/// form `lo:hi:ratio` (`1:64:2` is `1,2,4,…,64`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Text(String),
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, Failure> {
        match self {
            GridSpec::List(v) => Ok(v.clone()),
            GridSpec::Text(s) => parse_grid(s),
        }
    }
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::validation(format!("cannot parse grid `{s}`"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, ratio] => {
            let (lo, hi, ratio) = (num(lo)?, num(hi)?, num(ratio)?);
            if !(lo > 0.0 && hi >= lo && ratio > 1.0) {
                return Err(bad());
            }
            let mut out = Vec::new();
            let mut k = 0;
            loop {
                let x = lo * ratio.powi(k);
                if x > hi * (1.0 + 1e-12) {
                    break;
                }
                out.push(x);
                k += 1;
            }
            Ok(out)
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

/// Every experiment parameter. Fields a command does not use stay empty and
/// are left out of the resolved config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<i64>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reach: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_trials: Option<u64>,
    /// Where outputs go; not part of the hashed config.
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file; flags override its fields
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Law, e.g. `gaussian:sigma=1`, `poly-radial:alpha=2`, `poly-coord:alpha=0.5`, `pointmass:0,0`
    #[arg(long, global = true)]
    pub law: Option<String>,
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Core half-width
    #[arg(long = "L", global = true)]
    pub l: Option<i64>,
    /// Margin (one-dimensional commands)
    #[arg(long = "M", global = true)]
    pub m: Option<i64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Radius grid: `2,4,8` or `lo:hi:ratio`
    #[arg(long, global = true)]
    pub r: Option<String>,
    /// Window-length grid for the one-dimensional statistics
    #[arg(long, global = true)]
    pub t: Option<String>,
    /// Scale factors for the regularity check, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub max_ratio: Option<f64>,
    #[arg(long, global = true)]
    pub i_max: Option<u32>,
    #[arg(long, global = true)]
    pub reach: Option<i64>,
    #[arg(long, global = true)]
    pub audit_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    /// Bootstrap resamples
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Trials re-run for an exhaustive blocking-pair audit
    #[arg(long, global = true)]
    pub audit_trials: Option<u64>,
    /// Output directory; defaults to $PLM_OUTPUT_DIR, then `plm-output`
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads; results do not depend on it
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::validation(format!("invalid config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($f:ident),*) => {$(if o.$f.is_some() { self.$f = o.$f.clone(); })*};
        }
        set!(law, d, l, m, trials, k, seed, tolerance, max_ratio, i_max, reach, audit_threshold, max_retries, reps, audit_trials, output);
        if let Some(r) = &o.r {
            self.r = Some(GridSpec::Text(r.clone()));
        }
        if let Some(t) = &o.t {
            self.t = Some(GridSpec::Text(t.clone()));
        }
    }

    /// Canonical JSON of the resolved config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
