//! The command runner behind the `birkhoff` binary.
//!
//! Every subcommand takes the same flags; the ones a command does not use
//! are ignored. A config file of `key=value` lines (one per flag) can stand in
//! for any of them, with command-line flags taking precedence.

pub mod config;
pub mod plot;
pub mod run;
pub mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use crate::error::{Error, Result};
use crate::systems::descriptor::SystemSpec;
pub use config::AlphaGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    /// Pressure of -alpha*q - q*tau - b*log|F'| with its error bracket
    Pressure,
    /// Bowen dimension b* with a rigorous sandwich for non-linear maps
    Dimension,
    /// Shell census, tail exponent and the H3 ratio table
    Tail,
    /// The curve alpha -> b(alpha) by Newton continuation
    Spectrum,
    /// Rate of b* - b(alpha), the q-integral check and scaled products
    Rate,
    /// Run every invariant check on one system
    Verify,
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Pressure => "pressure",
            CommandKind::Dimension => "dimension",
            CommandKind::Tail => "tail",
            CommandKind::Spectrum => "spectrum",
            CommandKind::Rate => "rate",
            CommandKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "birkhoff", version, about, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,

    /// Builtin system: lueroth, gauss, linear_poly, linear_count, linear_exp, mp_induced
    #[arg(long, global = true)]
    pub system: Option<String>,

    /// System parameter as key=value, repeatable
    #[arg(long = "param", global = true)]
    pub params: Vec<String>,

    /// Geometric alpha grid lo:hi:count
    #[arg(long, global = true)]
    pub alpha: Option<String>,

    #[arg(long, global = true, default_value_t = 1e-9, allow_negative_numbers = true)]
    pub tol: f64,

    /// Letter truncation N for sandwiches; cap on the explicit shells for curves
    #[arg(long, global = true)]
    pub truncation: Option<u64>,

    /// Cylinder depth for sandwiches
    #[arg(long, global = true, default_value_t = 2)]
    pub depth: u32,

    /// Number of omega-shells for the tail command
    #[arg(long, global = true, default_value_t = 200)]
    pub shells: u64,

    #[arg(long, global = true, allow_negative_numbers = true)]
    pub q: Option<f64>,

    #[arg(long, global = true, allow_negative_numbers = true)]
    pub b: Option<f64>,

    /// Comma-separated x values for the scaled products
    #[arg(long, global = true)]
    pub exponents: Option<String>,

    /// CSV output path; standard output when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Directory for SVG plots
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// File of key=value lines, one per flag
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

pub const DEFAULT_GRID: AlphaGrid = AlphaGrid {
    lo: 1e2,
    hi: 1e6,
    count: 33,
};
pub const DEFAULT_SANDWICH_TRUNCATION: u64 = 200;
pub const DEFAULT_EXPONENTS: [f64; 3] = [0.0, 0.5, 1.5];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub command: CommandKind,
    pub alpha_grid: AlphaGrid,
    pub tolerance: f64,
    /// Sandwich truncation for pressure/dimension, explicit-shell cap for curves.
    pub truncation: Option<u64>,
    pub depth: u32,
    pub shells: u64,
    pub q: Option<f64>,
    pub b: Option<f64>,
    pub exponents: Vec<f64>,
    pub output_path: Option<PathBuf>,
    pub plot_path: Option<PathBuf>,
    pub workers: usize,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let name = cli
            .system
            .ok_or_else(|| Error::config("system", "required (e.g. --system lueroth)"))?;
        let mut system = SystemSpec::new(&name);
        for p in &cli.params {
            system.push_param(p)?;
        }
        let alpha_grid = match &cli.alpha {
            Some(s) => s.parse()?,
            None => DEFAULT_GRID,
        };
        if !(cli.tol > 0.0 && cli.tol.is_finite()) {
            return Err(Error::config("tol", format!("must be positive, got {}", cli.tol)));
        }
        if cli.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if cli.depth == 0 {
            return Err(Error::config("depth", "must be at least 1"));
        }
        if cli.truncation == Some(0) {
            return Err(Error::config("truncation", "must be at least 1"));
        }
        let exponents = match &cli.exponents {
            Some(s) => config::parse_list("exponents", s)?,
            None => DEFAULT_EXPONENTS.to_vec(),
        };
        Ok(Self {
            system,
            command: cli.command,
            alpha_grid,
            tolerance: cli.tol,
            truncation: cli.truncation,
            depth: cli.depth,
            shells: cli.shells,
            q: cli.q,
            b: cli.b,
            exponents,
            output_path: cli.out,
            plot_path: cli.plot,
            workers: cli.workers,
        })
    }

    pub fn parse_from(args: Vec<String>) -> Result<Self> {
        let args = config::expand_config(args)?;
        let cli = Cli::try_parse_from(args).map_err(|e| Error::config("arguments", e.to_string()))?;
        Self::from_cli(cli)
    }
}

/// Whether the run completed cleanly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Artifacts were written but some check or point failed.
    Partial,
}

/// Run one command inside a pool of `config.workers` threads.
pub fn run_command(config: &RunConfig) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| run::dispatch(config))
}

fn init_logging() {
    let env = env_logger::Env::default().default_filter_or("info");
    let _ = env_logger::Builder::from_env(env)
        .format(|buf, rec| writeln!(buf, "level={} target={} {}", rec.level(), rec.target(), rec.args()))
        .try_init();
}

/// Entry point for the binary: 0 on success, 1 when a check or point failed,
/// 2 on errors.
pub fn main() -> ExitCode {
    init_logging();
    let args: Vec<String> = std::env::args().collect();
    let expanded = match config::expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            error!("error=\"{e}\"");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(expanded) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = RunConfig::from_cli(cli).and_then(|cfg| run_command(&cfg));
    match outcome {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(1),
        Err(e) => {
            error!("error=\"{e}\"");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn spectrum_flags() {
        let c = RunConfig::parse_from(argv(
            "birkhoff spectrum --system lueroth --param r=2 --alpha 10:1e5:24 --tol 1e-9 --out s.csv --workers 4",
        ))
        .unwrap();
        assert_eq!(c.command, CommandKind::Spectrum);
        assert_eq!(c.system.params["r"], 2.0);
        assert_eq!(c.alpha_grid.count, 24);
        assert_eq!(c.workers, 4);
        assert_eq!(c.output_path, Some(PathBuf::from("s.csv")));
    }

    #[test]
    fn field_names_in_errors() {
        for (args, field) in [
            ("birkhoff spectrum", "system"),
            ("birkhoff spectrum --system gauss --tol -1", "tol"),
            ("birkhoff spectrum --system gauss --workers 0", "workers"),
            ("birkhoff rate --system gauss --exponents 1,x", "exponents"),
            ("birkhoff rate --system gauss --param r", "param"),
        ] {
            match RunConfig::parse_from(argv(args)) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field, "{args}"),
                other => panic!("{args}: {other:?}"),
            }
        }
    }

    #[test]
    fn later_flags_win() {
        let c = RunConfig::parse_from(argv("birkhoff tail --system gauss --depth 3 --depth 1")).unwrap();
        assert_eq!(c.depth, 1);
    }
}
