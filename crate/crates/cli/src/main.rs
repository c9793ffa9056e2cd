//! `trec`: command-line analyses of channel-resolved jump networks.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure or a failed
//! self-check.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use commands::{AnalyzeArgs, SimulateArgs, TotalsSource, TwinArgs};
use trec::spectral::DEFAULT_TOL;
use trec::trajsim::Horizon;

#[derive(Parser)]
#[command(name = "trec", version, about = "Channel-resolved Markov jump network analysis")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generator, stationary state, cumulants, completeness and entropy.
    Analyze {
        model: PathBuf,
        /// Records tested for completeness (comma separated; default all).
        #[arg(long, value_delimiter = ',')]
        records: Option<Vec<String>>,
        /// Also differentiate the scaled cumulant generating function.
        #[arg(long)]
        fd: bool,
        /// Finite-difference step.
        #[arg(long, default_value_t = trec::fcs::DEFAULT_FD_STEP)]
        fd_step: f64,
        #[command(flatten)]
        tol: Tol,
    },
    /// Remaining ambiguity after measuring some records, and which targets
    /// it leaves predictable.
    Diagnose {
        model: PathBuf,
        /// Measured records (comma separated; empty for none).
        #[arg(long, value_delimiter = ',', default_value = "")]
        measured: Vec<String>,
        /// Target records (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        target: Vec<String>,
        #[command(flatten)]
        tol: Tol,
    },
    /// Exact interval of a record combination given transition totals.
    Bounds {
        model: PathBuf,
        /// `record=weight`; repeat for combinations.
        #[arg(long = "direction", value_parser = parse_direction, required = true)]
        direction: Vec<(String, f64)>,
        /// `stationary` or a JSON file with one total per transition.
        #[arg(long, default_value = "stationary")]
        u: String,
        #[command(flatten)]
        tol: Tol,
    },
    /// Two-terminal dot and its rate-shifted twin.
    TwinDemo {
        #[command(flatten)]
        dot: DotArgs,
    },
    /// Gillespie simulation with Monte Carlo cumulants.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trajectories: usize,
        /// Simulated time per trajectory.
        #[arg(long, conflicts_with = "jumps")]
        horizon: Option<f64>,
        /// Jump budget per trajectory instead of a time horizon.
        #[arg(long)]
        jumps: Option<u64>,
        #[arg(long, default_value_t = 0.0)]
        burn_in: f64,
        /// Start every trajectory in this state instead of sampling the
        /// stationary distribution.
        #[arg(long)]
        initial: Option<String>,
        /// Write the jumps of one trajectory to this file.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Trajectory written by `--dump`.
        #[arg(long, default_value_t = 0)]
        dump_index: usize,
        #[command(flatten)]
        tol: Tol,
    },
    /// Print the explicit-channel model file of a two-terminal dot.
    Dot {
        #[command(flatten)]
        dot: DotArgs,
        /// Emit the twin device instead.
        #[arg(long)]
        twin: bool,
    },
}

#[derive(Args)]
struct Tol {
    /// Relative rank tolerance for kernels and completeness.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct DotArgs {
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    eta: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    eps: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    mu_l: f64,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    mu_r: f64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

impl DotArgs {
    fn twin_args(&self) -> TwinArgs {
        TwinArgs {
            eta: self.eta,
            eps: self.eps,
            mu_l: self.mu_l,
            mu_r: self.mu_r,
            temperature: self.temperature,
            gamma: self.gamma,
        }
    }
}

fn parse_direction(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, w) = s.split_once('=').ok_or_else(|| format!("expected record=weight, got `{s}`"))?;
    let w: f64 = w.trim().parse().map_err(|e| format!("weight `{w}`: {e}"))?;
    Ok((name.trim().to_string(), w))
}

enum Outcome {
    Report(Value),
    /// Report written, but a self-check failed.
    Failed(Value, Vec<String>),
    Raw(String),
}

fn run(cli: &Cli) -> Result<Outcome> {
    Ok(match &cli.command {
        Command::Analyze { model, records, fd, fd_step, tol } => Outcome::Report(commands::analyze(&AnalyzeArgs {
            model,
            records: records.as_deref(),
            tol: tol.tol,
            fd: *fd,
            fd_step: *fd_step,
        })?),
        Command::Diagnose { model, measured, target, tol } => {
            let measured: Vec<String> = measured.iter().filter(|s| !s.is_empty()).cloned().collect();
            Outcome::Report(commands::diagnose(model, &measured, target, tol.tol)?)
        }
        Command::Bounds { model, direction, u, tol } => {
            let source = if u == "stationary" {
                TotalsSource::Stationary
            } else {
                TotalsSource::File(u.as_ref())
            };
            Outcome::Report(commands::bounds(model, direction, source, tol.tol)?)
        }
        Command::TwinDemo { dot } => {
            let (v, failed) = commands::twin_demo(&dot.twin_args())?;
            if failed.is_empty() {
                Outcome::Report(v)
            } else {
                Outcome::Failed(v, failed)
            }
        }
        Command::Simulate { model, seed, trajectories, horizon, jumps, burn_in, initial, dump, dump_index, tol } => {
            let horizon = match (horizon, jumps) {
                (_, Some(n)) => Horizon::Jumps(*n),
                (Some(t), None) => Horizon::Time(*t),
                (None, None) => Horizon::Time(100.0),
            };
            Outcome::Report(commands::simulate_cmd(&SimulateArgs {
                model,
                seed: *seed,
                trajectories: *trajectories,
                horizon,
                burn_in: *burn_in,
                initial: initial.as_deref(),
                dump: dump.as_deref(),
                dump_index: *dump_index,
                tol: tol.tol,
            })?)
        }
        Command::Dot { dot, twin } => Outcome::Raw(commands::dot_model(&dot.twin_args(), *twin)?),
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .find_map(|e| e.downcast_ref::<trec::Error>())
        .is_some_and(trec::Error::is_numerical);
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    let json = cli.json || cli.format == Format::Json;
    let print = |v: &Value| {
        if json {
            print!("{}", report::to_json(v));
        } else {
            print!("{}", report::render_text(v));
        }
    };
    match run(&cli) {
        Ok(Outcome::Report(v)) => {
            print(&v);
            ExitCode::SUCCESS
        }
        Ok(Outcome::Failed(v, failed)) => {
            print(&v);
            let err = anyhow!("{}", failed.join("; "));
            eprintln!("error: check failed: {err}");
            ExitCode::from(2)
        }
        Ok(Outcome::Raw(s)) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
