//! `lwrdue`: network loading replays, equilibrium solves and run reports.
//!
//! Exit codes: 0 success (including a non-converged solve), 1 usage, 2 unreadable or
//! malformed input, 3 invalid model or parameters, 4 runtime failure.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "lwrdue", version, about = "Dynamic network loading and dynamic user equilibrium")]
struct Cli {
    /// Cap on worker threads (default: one per core).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a given departure profile onto the network.
    Dnl(DnlArgs),
    /// Solve for a route-and-departure-time equilibrium.
    Due(DueArgs),
    /// Summarize a completed `due` run directory.
    Report(ReportArgs),
    /// Write the k shortest free-flow paths of every O-D pair.
    Paths(PathsArgs),
}

/// Inputs shared by `dnl` and `due`. Flags override values read from `--config`.
#[derive(Args, Debug)]
struct RunArgs {
    /// Run configuration (TOML); relative paths inside resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    paths: Option<PathBuf>,
    /// Time step in seconds.
    #[arg(long, value_parser = positive)]
    dt: Option<f64>,
    /// Horizon length in seconds, measured from --t0.
    #[arg(long, value_parser = positive)]
    horizon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t0: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    junction_model: Option<String>,
}

#[derive(Args, Debug)]
struct DnlArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Departure matrix CSV (`path_id,0,1,…`).
    #[arg(long)]
    departures: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DueArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Generate this many shortest paths per O-D instead of reading --paths.
    #[arg(long, value_name = "K", conflicts_with = "paths", value_parser = clap::value_parser!(u32).range(1..))]
    auto_paths: Option<u32>,
    #[arg(long)]
    demand: Option<PathBuf>,
    #[arg(long, value_parser = positive)]
    alpha: Option<f64>,
    #[arg(long, value_parser = positive)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    max_iters: Option<u32>,
    /// Indifference band in seconds.
    #[arg(long, value_parser = nonnegative)]
    br_tolerance: Option<f64>,
    #[arg(long, value_parser = nonnegative)]
    early_weight: Option<f64>,
    #[arg(long, value_parser = nonnegative)]
    late_weight: Option<f64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Run directory written by `due`.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Paths to export curves for, e.g. `p1,p5`.
    #[arg(long, value_delimiter = ',', value_parser = path_id)]
    paths: Vec<u32>,
    /// Where to write report files (default: the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PathsArgs {
    #[arg(long)]
    network: PathBuf,
    /// Demand CSV naming the O-D pairs.
    #[arg(long)]
    demand: PathBuf,
    #[arg(short, long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,
    /// Output path file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be a nonnegative number".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn path_id(s: &str) -> Result<u32, String> {
    let digits = s.strip_prefix(['p', 'P']).unwrap_or(s);
    digits.parse().map_err(|_| format!("not a path id: {s}"))
}

/// A failed command: a usage error or a message with its exit code.
pub enum Failure {
    Usage(clap::Error),
    Exit(u8, String),
}

impl Failure {
    pub fn parse(msg: impl ToString) -> Self {
        Failure::Exit(2, msg.to_string())
    }
    pub fn invalid(msg: impl ToString) -> Self {
        Failure::Exit(3, msg.to_string())
    }
    pub fn runtime(msg: impl ToString) -> Self {
        Failure::Exit(4, msg.to_string())
    }
}

/// Usage error for subcommand `sub`, printed with its usage line.
pub fn usage(sub: &str, msg: &str) -> Failure {
    let mut cmd = Cli::command();
    cmd.build();
    let sub = cmd.find_subcommand_mut(sub).expect("known subcommand");
    Failure::Usage(sub.error(ErrorKind::MissingRequiredArgument, msg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("LWRDUE_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match cli.command {
        Command::Dnl(args) => commands::dnl(args),
        Command::Due(args) => commands::due(args),
        Command::Report(args) => report::run(args),
        Command::Paths(args) => commands::paths(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(1)
        }
        Err(Failure::Exit(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
