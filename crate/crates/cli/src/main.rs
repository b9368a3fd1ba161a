//! `magflow`: runs one experiment per subcommand and writes its artifacts
//! plus a `manifest.json` into the output directory.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use config::{ConfigFile, SCHEMA};

const DEFAULT_SEED: u64 = 20_240_601;
const MANIFEST_SCHEMA: &str = "magflow-manifest/1";

#[derive(Parser, Debug)]
#[command(name = "magflow", version, about = "Magnetic geodesic flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; defaults are used for anything not given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Integrate one trajectory to CSV.
    Simulate,
    /// Closed-orbit periods against ℓ/√(1-b²) on hyperbolic cylinders.
    MlsScaling,
    /// Seeded intertwining sweep for the PSL conjugacy.
    PslConjugacy,
    /// Validate the exact Anosov construction.
    BurnsBuild,
    /// Sampled Riccati certificate.
    AnosovCert,
    /// Magnetic length of perturbed closed orbits.
    MagneticLength,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::MlsScaling => "mls-scaling",
            Command::PslConjugacy => "psl-conjugacy",
            Command::BurnsBuild => "burns-build",
            Command::AnosovCert => "anosov-cert",
            Command::MagneticLength => "magnetic-length",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Failed(String),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Failed(_) => 4,
        }
    }
}

impl From<magflow::Error> for CliError {
    fn from(e: magflow::Error) -> Self {
        match e {
            magflow::Error::Settings(m) => CliError::Config(m),
            magflow::Error::Validation(v) => CliError::Failed(format!("validation failed: {}", v.join("; "))),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

/// Errors raised while building the experiment from its configuration.
pub fn setup(e: magflow::Error) -> CliError {
    match e {
        magflow::Error::Validation(_) => e.into(),
        other => CliError::Config(other.to_string()),
    }
}

#[derive(Serialize)]
struct Artifact {
    path: String,
    bytes: usize,
    sha256: String,
}

/// Output directory that records every file written to it.
pub struct Out {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Out {
    fn new(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            path: name.into(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut v = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        v.push(b'\n');
        self.write(name, &v)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'a str,
    command: &'a str,
    config_hash: String,
    seed: u64,
    started: String,
    finished: String,
    exit_code: u8,
    versions: serde_json::Value,
    artifacts: &'a [Artifact],
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile {
            schema: SCHEMA,
            ..ConfigFile::default()
        });
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg: ConfigFile = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if cfg.schema != SCHEMA {
        return Err(CliError::Config(format!(
            "unsupported schema version {} (expected {SCHEMA})",
            cfg.schema
        )));
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("magflow {}: {e}", cli.command.name());
            e.code()
        }
    };
    ExitCode::from(code)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let file = load_config(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let effective = commands::effective(cli.command, file, seed);
    let canonical = serde_json::to_vec(&effective).map_err(|e| CliError::Config(e.to_string()))?;
    let config_hash = sha256_hex(&canonical);

    let started = chrono::Utc::now().to_rfc3339();
    let mut out = Out::new(&cli.out)?;
    let toml_text = toml::to_string(&effective).map_err(|e| CliError::Config(e.to_string()))?;
    out.write("config.toml", toml_text.as_bytes())?;
    let result = commands::run(cli.command, &effective, seed, &mut out);
    if let Err(CliError::Numeric(msg)) = &result {
        out.json(
            "diagnostic.json",
            &serde_json::json!({ "command": cli.command.name(), "error": msg }),
        )?;
    }
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        command: cli.command.name(),
        config_hash,
        seed,
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        exit_code: result.as_ref().map_or_else(|e| e.code(), |_| 0),
        versions: serde_json::json!({ "magflow": env!("CARGO_PKG_VERSION") }),
        artifacts: &out.artifacts,
    };
    let mut m = serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::other)?;
    m.push(b'\n');
    fs::write(out.dir.join("manifest.json"), m)?;
    result
}
