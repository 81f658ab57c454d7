//! File formats and the `ac-action` command line front-end.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical failures.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod container;
mod error;
pub mod output;

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ac-action", version, about = "Allen-Cahn action experiments")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Random seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-snapshot work.
    #[arg(long, global = true, env = "AC_ACTION_THREADS")]
    pub threads: Option<usize>,
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the deterministic or stochastic Allen-Cahn flow.
    Simulate,
    /// Minimize the action over paths with fixed endpoints.
    Minimize,
    /// Diffuse-interface observables of a stored path.
    Diagnose {
        /// Path container written by `simulate` or `minimize`.
        path: PathBuf,
        /// Interface width; overrides the config's `eps`.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Reduced action of a front evolution.
    Reduced {
        /// Evolution JSON, or a `{"u": .., "mu": ..}` pair.
        evolution: PathBuf,
    },
    /// Diffuse action of a path against a reduced evolution.
    Compare {
        path: PathBuf,
        /// Evolution JSON; extracted from the path in 1D when omitted.
        evolution: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
    },
}

/// Settings shared by every command.
#[derive(Debug)]
pub struct Context {
    pub config: Option<RunConfig>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Context {
    pub fn config(&self) -> CliResult<&RunConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError::config("this command needs --config"))
    }

    /// `--output`, else the config's `output`.
    pub fn output_dir_opt(&self) -> Option<&Path> {
        self.output
            .as_deref()
            .or_else(|| self.config.as_ref().and_then(|c| c.output.as_deref()))
    }

    /// Creates the output directory.
    pub fn output_dir(&self) -> CliResult<PathBuf> {
        let dir = self
            .output_dir_opt()
            .ok_or_else(|| CliError::config("no output directory: pass --output or set key `output`"))?
            .to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }

    pub fn seed(&self) -> u64 {
        self.seed
            .or_else(|| self.config.as_ref().and_then(|c| c.seed))
            .unwrap_or(0)
    }

    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = cli.config.as_deref().map(config::load).transpose()?;
    let ctx = Context {
        config,
        output: cli.output,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Minimize => commands::minimize(&ctx),
        Command::Diagnose { path, eps } => commands::diagnose(&ctx, &path, eps),
        Command::Reduced { evolution } => commands::reduced(&ctx, &evolution),
        Command::Compare { path, evolution, eps } => commands::compare(&ctx, &path, evolution.as_deref(), eps),
    }
}
