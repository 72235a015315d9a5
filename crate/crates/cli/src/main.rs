//! `plm`: reproducible experiments on perturbed lattices.
//!
//! Every run resolves a JSON config (file, then flags, then defaults), writes
//! it as `config.json` next to its outputs and stamps each output with the
//! config's SHA-256. Exit codes: 0 success, 2 invalid input, 3 model error,
//! 4 statistics unresolvable within the trial budget.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{Config, Overrides};
use plm_core::Error;

#[derive(Parser)]
#[command(name = "plm", version, about = "Perturbed-lattice matching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// log h(r) by the truncated product, with an exponent fit
    HoleExact,
    /// Monte Carlo hole probability
    HoleMc,
    /// ρ(r) = log h(r) / (r^d log p(r)) over a grid
    HoleBounds,
    /// Integrability and regularity checks of the tail
    Assumptions,
    /// Build covers and check the cover and matching properties
    CoverVerify,
    /// Tail of the center site's cover-matching distance
    MatchTail,
    /// Tail of the center cover radius against h(r)
    RadiusTail,
    /// Tail of |M(0)| under the one-dimensional greedy stable matching
    OnedTail,
    /// Exact Var Π[0, t) and its growth exponent
    OnedVariance,
    /// Normalized truncated mean of |M(0)| with bootstrap bands
    OnedMoment,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::HoleExact => "hole-exact",
            Command::HoleMc => "hole-mc",
            Command::HoleBounds => "hole-bounds",
            Command::Assumptions => "assumptions",
            Command::CoverVerify => "cover-verify",
            Command::MatchTail => "match-tail",
            Command::RadiusTail => "radius-tail",
            Command::OnedTail => "oned-tail",
            Command::OnedVariance => "oned-variance",
            Command::OnedMoment => "oned-moment",
        }
    }
}

/// A failed run and its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn validation(message: String) -> Self {
        Failure { code: 2, kind: "InvalidConfig".into(), message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::LawSpec { .. } | Error::Unsupported(_) => 2,
            Error::AllMisses { .. } | Error::Unresolvable(_) => 4,
            _ => 3,
        };
        Failure { code, kind: e.kind().into(), message: e.to_string() }
    }
}

/// Writes outputs into one directory, each stamped with the config hash.
pub struct Output {
    dir: PathBuf,
    hash: String,
}

impl Output {
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| Failure { code: 3, kind: "Io".into(), message: format!("{}: {e}", path.display()) })
    }

    /// JSON report with the hash as its first field.
    pub fn write_json<T: Serialize>(&self, name: &str, report: &T) -> Result<(), Failure> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            config_sha256: &'a str,
            #[serde(flatten)]
            report: &'a T,
        }
        let text = serde_json::to_string_pretty(&Stamped { config_sha256: &self.hash, report })
            .map_err(|e| Failure { code: 3, kind: "Io".into(), message: e.to_string() })?;
        self.write_text(name, &(text + "\n"))
    }
}

fn output_dir(cfg: &Config) -> PathBuf {
    cfg.output
        .clone()
        .or_else(|| std::env::var_os("PLM_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("plm-output"))
}

fn run(cli: &Cli, out_dir: &mut Option<PathBuf>, hash: &mut Option<String>) -> Result<(), Failure> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(c) = &cfg.command {
        if c != cli.command.name() {
            return Err(Failure::validation(format!("config is for `{c}`, not `{}`", cli.command.name())));
        }
    }
    cfg.apply(&cli.overrides);
    let dir = output_dir(&cfg);
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure { code: 3, kind: "Io".into(), message: format!("{}: {e}", dir.display()) })?;
    *out_dir = Some(dir.clone());
    let resolved = commands::resolve(cli.command, cfg)?;
    let out = Output { dir, hash: resolved.hash() };
    *hash = Some(out.hash.clone());
    out.write_json("config.json", &serde_json::json!({ "config": resolved }))?;
    if let Some(n) = cli.overrides.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::validation(format!("cannot start {n} workers: {e}")))?;
    }
    commands::execute(cli.command, &resolved, &out)
}

fn write_error(dir: &Path, hash: Option<&str>, f: &Failure) {
    let record = serde_json::json!({
        "config_sha256": hash,
        "kind": f.kind,
        "message": f.message,
        "exit_code": f.code,
    });
    let _ = std::fs::write(dir.join("error.json"), serde_json::to_string_pretty(&record).unwrap() + "\n");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut dir, mut hash) = (None, None);
    match run(&cli, &mut dir, &mut hash) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error [{}]: {}", f.kind, f.message);
            if let Some(dir) = dir {
                write_error(&dir, hash.as_deref(), &f);
            }
            ExitCode::from(f.code)
        }
    }
}
