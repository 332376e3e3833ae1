//! `ringleap`: configuration-driven experiments writing CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 numerical failure (artifacts written so far are kept).

mod config;
mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const GAMMA_ENV: &str = "RINGLEAP_GAMMA";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ringleap::Error> for CliError {
    fn from(e: ringleap::Error) -> Self {
        match e {
            ringleap::Error::Domain(_) => CliError::Config(e.to_string()),
            ringleap::Error::Io(_) | ringleap::Error::Format(_) => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "ringleap", version, about = "Vortex-ring leapfrogging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate the configuration, print it resolved and stop.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args, Clone)]
struct PortraitArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    eps: Option<f64>,
    /// Total momentum of the pair.
    #[arg(long = "P")]
    momentum: Option<f64>,
    /// Nodes per axis of the level-curve grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Nodes per axis of the classification grid.
    #[arg(long)]
    regions: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Vortex profile f_1 and the core constant γ.
    Profile(Common),
    /// Ring system (LF)_ε in rescaled time.
    OdeLfEps(Common),
    /// Limiting point-vortex system (LF).
    OdeLf(Common),
    /// (LF)_ε against the lifted (LF) over an ε ladder, per perpendicular convention.
    LiftCompare(Common),
    /// Level curves and region labels of the two-ring system.
    Portrait(PortraitArgs),
    /// Axisymmetric Gross–Pitaevskii run from a reference field.
    GpRun(Common),
    /// Energy outside the cores: quadrature against closed form and expansion.
    LemmaA1(Common),
    /// Weighted energy of the reference field against H_ε.
    EnergyCheck(Common),
}

/// Reads the scenario table and applies flag overrides. Without overrides
/// the text is deserialized directly so errors carry line numbers.
fn load<T: DeserializeOwned>(common: &Common, overrides: toml::Table) -> Result<T, CliError> {
    let (text, origin) = match &common.config {
        Some(p) => (
            fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (String::new(), "<flags>".to_string()),
    };
    let err = |e: toml::de::Error| CliError::Config(format!("{origin}: {e}"));
    if overrides.is_empty() {
        return toml::from_str(&text).map_err(err);
    }
    let mut table: toml::Table = toml::from_str(&text).map_err(err)?;
    table.extend(overrides);
    toml::Value::Table(table).try_into().map_err(err)
}

/// γ from the configuration, else `RINGLEAP_GAMMA`, else the computed constant.
pub fn resolve_gamma(configured: Option<f64>) -> Result<(f64, &'static str), CliError> {
    if let Some(g) = configured {
        return Ok((g, "config"));
    }
    match std::env::var(GAMMA_ENV) {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|g| g.is_finite())
            .map(|g| (g, "env"))
            .ok_or_else(|| CliError::Config(format!("`{GAMMA_ENV}`: cannot parse {v:?} as a number"))),
        Err(_) => Ok((ringleap::field::profile::core_gamma(), "computed")),
    }
}

/// Git-style blob hash (`sha256` of `blob <len>\0<bytes>`).
fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

/// Runs one scenario and records `meta.json` whatever the outcome.
fn execute<T: Serialize>(
    name: &str,
    dry_run: bool,
    config: T,
    validate: impl FnOnce(&T) -> Result<(), CliError>,
    out_dir: impl FnOnce(&T) -> PathBuf,
    body: impl FnOnce(&T, &Path) -> Result<serde_json::Value, CliError>,
) -> Result<(), CliError> {
    validate(&config)?;
    if dry_run {
        let text = serde_json::to_string_pretty(&config).map_err(|e| CliError::Io(e.to_string()))?;
        println!("{text}");
        return Ok(());
    }
    let dir = out_dir(&config);
    fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("`output_dir` {}: {e}", dir.display())))?;
    let resolved = serde_json::to_value(&config).map_err(|e| CliError::Io(e.to_string()))?;
    // Where results go is not an input.
    let mut inputs = resolved.clone();
    if let Some(m) = inputs.as_object_mut() {
        m.remove("output_dir");
    }
    let canonical = serde_json::to_vec(&inputs).map_err(|e| CliError::Io(e.to_string()))?;
    let started = Instant::now();
    let result = body(&config, &dir);
    let (status, summary) = match &result {
        Ok(v) => ("ok", v.clone()),
        Err(e) => ("error", serde_json::Value::String(e.to_string())),
    };
    let meta = serde_json::json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": resolved,
        "input_hash": blob_hash(&canonical),
        "status": status,
        "summary": summary,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "finished_unix": SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    });
    write_json(&dir, "meta.json", &meta)?;
    result.map(|_| ())
}

macro_rules! scenario {
    ($name:expr, $ty:ty, $common:expr, $overrides:expr, $body:path) => {{
        let mut cfg: $ty = load($common, $overrides)?;
        if let Some(out) = &$common.out {
            cfg.output_dir = out.clone();
        }
        execute($name, $common.dry_run, cfg, |c| c.validate(), |c| c.output_dir.clone(), $body)
    }};
}

fn run(cli: Cli) -> Result<(), CliError> {
    use config::*;
    let none = toml::Table::new;
    match &cli.command {
        Command::Profile(c) => scenario!("profile", ProfileConfig, c, none(), scenarios::profile),
        Command::OdeLfEps(c) => scenario!("ode-lf-eps", OdeLfEpsConfig, c, none(), scenarios::ode_lf_eps),
        Command::OdeLf(c) => scenario!("ode-lf", OdeLfConfig, c, none(), scenarios::ode_lf),
        Command::LiftCompare(c) => scenario!("lift-compare", LiftCompareConfig, c, none(), scenarios::lift_compare),
        Command::Portrait(a) => {
            let mut o = toml::Table::new();
            if let Some(v) = a.eps {
                o.insert("epsilon".into(), v.into());
            }
            if let Some(v) = a.momentum {
                o.insert("momentum".into(), v.into());
            }
            if let Some(v) = a.grid {
                o.insert("levels".into(), (v as i64).into());
            }
            if let Some(v) = a.regions {
                o.insert("regions".into(), (v as i64).into());
            }
            scenario!("portrait", PortraitConfig, &a.common, o, scenarios::portrait)
        }
        Command::GpRun(c) => scenario!("gp-run", GpRunConfig, c, none(), scenarios::gp_run),
        Command::LemmaA1(c) => scenario!("lemma-a1", LemmaA1Config, c, none(), scenarios::lemma_a1),
        Command::EnergyCheck(c) => scenario!("energy-check", EnergyCheckConfig, c, none(), scenarios::energy_check),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ringleap: {e}");
            ExitCode::from(e.code())
        }
    }
}
