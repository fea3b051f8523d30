use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use scs_qkd::cli::{cmd_maxdist, cmd_rate, cmd_sweep, fmt_num, OutputFormat, RunConfig};
use scs_qkd::Error;

/// Finite-key rates for side-channel-secure QKD with imperfect sources.
#[derive(Parser)]
#[command(name = "scs-qkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Key rate at one distance, optimised over mu and p_w unless fixed.
    Rate {
        #[command(flatten)]
        common: Common,
        /// Fix the signal intensity instead of optimising it.
        #[arg(long)]
        mu: Option<f64>,
        /// Fix the send probability instead of optimising it.
        #[arg(long)]
        pw: Option<f64>,
    },
    /// Optimised rate over a distance grid, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Largest distance with a positive rate.
    Maxdist {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    distance: Option<f64>,
    #[arg(long = "mu-o")]
    mu_o: Option<f64>,
    #[arg(long = "mu-e")]
    mu_e: Option<f64>,
    #[arg(long)]
    xi: Option<u32>,
    #[arg(long = "n-windows")]
    n_windows: Option<u64>,
    /// Write the machine-readable result here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// Emit JSON instead of text (rate and maxdist).
    #[arg(long)]
    json: bool,
    /// Print the effective configuration and exit.
    #[arg(long = "emit-config")]
    emit_config: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(d) = self.distance {
            cfg.distance_km = d;
        }
        if let Some(m) = self.mu_o {
            cfg.mu_o_a = m;
            cfg.mu_o_b = m;
        }
        if let Some(m) = self.mu_e {
            cfg.mu_e = m;
        }
        if let Some(x) = self.xi {
            cfg.xi = x;
        }
        if let Some(n) = self.n_windows {
            cfg.n_windows = n;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.json {
            cfg.format = OutputFormat::Json;
        }
        Ok(cfg)
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), Error> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{path}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        e if e.is_config_error() => 1,
        Error::NoSecureMapping(_)
        | Error::NoEffectiveWindows
        | Error::NoUntaggedBits
        | Error::NoSecureDistance => 3,
        _ => 2,
    }
}

fn configure_threads() {
    let Ok(raw) = std::env::var("SCS_QKD_THREADS") else { return };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                warn!("could not size thread pool: {e}");
            }
        }
        _ => warn!("ignoring SCS_QKD_THREADS={raw}"),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let (common, mu, pw) = match &cli.command {
        Command::Rate { common, mu, pw } => (common, *mu, *pw),
        Command::Sweep { common } | Command::Maxdist { common } => (common, None, None),
    };
    let mut cfg = common.load()?;
    if mu.is_some() {
        cfg.mu = mu;
    }
    if pw.is_some() {
        cfg.p_w = pw;
    }
    if common.emit_config {
        print!("{}", cfg.dump());
        return Ok(0);
    }
    info!("config_hash={}", cfg.config_hash());
    match cli.command {
        Command::Rate { .. } => {
            let report = cmd_rate(&cfg)?;
            match (cfg.format, &cfg.out) {
                (OutputFormat::Json, _) => emit(&cfg, &report.json())?,
                (OutputFormat::Text, None) => print!("{}", report.human()),
                (OutputFormat::Text, Some(_)) => {
                    print!("{}", report.human());
                    emit(&cfg, &report.json())?;
                }
            }
            Ok(if report.secure { 0 } else { 3 })
        }
        Command::Sweep { .. } => {
            emit(&cfg, &cmd_sweep(&cfg)?)?;
            Ok(0)
        }
        Command::Maxdist { .. } => {
            let d = cmd_maxdist(&cfg)?;
            let text = match cfg.format {
                OutputFormat::Json => format!(
                    "{{\"max_distance_km\": {}, \"resolution_km\": {}, \"config_hash\": \"{}\"}}\n",
                    fmt_num(d),
                    fmt_num(cfg.resolution_km),
                    cfg.config_hash()
                ),
                OutputFormat::Text => format!("max_distance_km  {}\n", fmt_num(d)),
            };
            emit(&cfg, &text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
