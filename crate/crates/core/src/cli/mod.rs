//! Configuration-driven front end: parses a run file, executes its tasks and
//! writes a report.
//!
//! Exit statuses: 0 when no row failed, 1 when some row failed, 2 for a
//! rejected configuration or usage, 3 for I/O failures.

mod config;
mod report;
mod tasks;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{
    ExpBoundTask, Format, KatoTask, KernelCheckTask, LocalTimeKind, McConfig, MomentTask, OutputConfig, RunConfig,
    TaskSpec, SCHEMA_VERSION,
};
pub use report::{echoed_config, Report, ReportRow, CSV_COLUMNS};
pub use tasks::{builtin_kernels, estimator_for, execute, moment_request, KERNEL_CHECK_TOL};

use crate::error::KacError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "KACMOMENT_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "kacmoment", version, about = "Kac moment formulas with a Monte Carlo cross-check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Every task in the run file.
    Run(CommonArgs),
    /// Kernel residuals; checks the built-in families without a run file.
    KernelCheck(CommonArgs),
    /// Kato-class tables.
    Kato(CommonArgs),
    /// Engine moments only.
    Moment(CommonArgs),
    /// Engine moments against simulation.
    McCompare(CommonArgs),
    /// Exponential-moment bounds.
    ExpBound(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only the task with this id.
    #[arg(long)]
    task: Option<String>,
    /// Report destination; overrides the output block.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed_override: Option<u64>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Command {
    fn parts(&self) -> (Option<&'static str>, &CommonArgs) {
        match self {
            Command::Run(a) => (None, a),
            Command::KernelCheck(a) => (Some("kernel-check"), a),
            Command::Kato(a) => (Some("kato"), a),
            Command::Moment(a) => (Some("moment"), a),
            Command::McCompare(a) => (Some("mc-compare"), a),
            Command::ExpBound(a) => (Some("exp-bound"), a),
        }
    }
}

fn builtin_check_config() -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        kernels: Default::default(),
        measures: Default::default(),
        tasks: vec![TaskSpec::KernelCheck(KernelCheckTask { id: None, kernel: None })],
        mc: None,
        output: OutputConfig::default(),
        quadrature: None,
    }
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<KacError> for Failure {
    fn from(e: KacError) -> Self {
        match e {
            KacError::Io(m) => Failure::Io(m),
            other => Failure::Config(other.to_string()),
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("kacmoment: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Io(m)) => {
            eprintln!("kacmoment: i/o error: {m}");
            EXIT_IO
        }
    }
}

fn dispatch(command: &Command) -> Result<i32, Failure> {
    let (op, args) = command.parts();
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None if op == Some("kernel-check") => builtin_check_config(),
        None => return Err(Failure::Config("--config is required".into())),
    };
    if let Some(seed) = args.seed_override {
        match config.mc.as_mut() {
            Some(mc) => mc.seed = seed,
            None => return Err(Failure::Config("--seed-override needs an mc block".into())),
        }
    }
    if let Some(f) = args.format {
        config.output.format = f;
    }
    if let Some(out) = &args.out {
        config.output.path = Some(out.display().to_string());
    }
    let indices: Vec<usize> = config
        .tasks
        .iter()
        .enumerate()
        .filter(|(i, t)| op.is_none_or(|op| t.op() == op) && args.task.as_ref().is_none_or(|id| t.id(*i) == *id))
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        return Err(Failure::Config(match &args.task {
            Some(id) => format!("no task \"{id}\" matches this subcommand"),
            None => "no task matches this subcommand".into(),
        }));
    }
    let workers = args.workers.or(config.mc.as_ref().and_then(|m| m.workers)).unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Config(format!("worker pool: {e}")))?;
    let verbose = config.output.verbosity;
    if verbose >= 2 {
        eprintln!("kacmoment: {} task(s) on {workers} worker(s)", indices.len());
    }
    let report = pool.install(|| execute(&config, &indices));
    match &config.output.path {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Failure::Io(format!("{path}: {e}")))?;
            let mut w = io::BufWriter::new(file);
            report.write(config.output.format, &mut w)?;
            w.flush().map_err(|e| Failure::Io(format!("{path}: {e}")))?;
        }
        None => {
            let stdout = io::stdout();
            report.write(config.output.format, stdout.lock())?;
        }
    }
    if verbose >= 1 {
        for r in report.rows.iter().filter(|r| r.verdict == crate::montecarlo::Verdict::Fail) {
            eprintln!("kacmoment: task {} failed: {}", r.task_id, r.detail);
        }
    }
    Ok(if report.has_failures() { EXIT_FAIL } else { EXIT_PASS })
}
