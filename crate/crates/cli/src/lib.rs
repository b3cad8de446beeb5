//! Batch front end: configuration, orchestration and CSV output.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod selftest;

use std::path::PathBuf;

use clap::{Args, Parser};

use commands::{Command, Timer};
use config::{Overrides, RunConfig};
use error::CliError;
use output::{runs_root, write_run, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "copolymer",
    version,
    about = "Copolymer with adsorption: exact DP and replica estimators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat JSON config file; flags win over its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed of the disorder and path generators
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of disorder replicas
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Chain length
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Comma-separated lengths
    #[arg(long, global = true, value_delimiter = ',')]
    pub ladder: Option<Vec<usize>>,
    /// Worker threads (default: machine parallelism)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_tilde: Option<f64>,
    #[arg(long, global = true)]
    pub h_tilde: Option<f64>,
    /// Any config key, as KEY=VALUE with a JSON value; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output root; overrides the COPOLYMER_RUNS_DIR environment variable
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            replicas: self.replicas,
            n: self.n,
            ladder: self.ladder.clone(),
            lambda: self.lambda,
            h: self.h,
            lambda_tilde: self.lambda_tilde,
            h_tilde: self.h_tilde,
            set: self.set.clone(),
        }
    }
}

/// Runs one command and returns the run directory.
pub fn execute(cli: &Cli) -> Result<PathBuf, CliError> {
    let mut timer = Timer::default();
    let cfg = timer.phase("config", || {
        RunConfig::load(cli.common.config.as_deref(), &cli.common.overrides())
    })?;
    let threads = match cli.common.threads {
        Some(0) => return Err(CliError::Config("threads must be >= 1".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| commands::run(cli.command, &cfg, &mut timer))?;
    let name = cli.command.name();
    let manifest = RunManifest {
        run_id: cfg.run_id(name),
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION"),
        threads,
        config: cfg.canonical_json(),
        timings: timer.phases,
        outputs: outcome.tables.iter().map(|t| t.name.clone()).collect(),
    };
    let root = cli.common.out.clone().unwrap_or_else(runs_root);
    let dir = write_run(&root, &manifest, &outcome.tables)?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(dir),
    }
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("copolymer {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
