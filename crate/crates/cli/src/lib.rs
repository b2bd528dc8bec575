//! Command-line harness for the fracsource toolkit.

pub mod config;
pub mod demo;
pub mod error;
pub mod output;
pub mod tasks;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::config::Task;
use crate::error::CliError;
use crate::tasks::{run_task, Overrides, Run};

pub const THREADS_ENV: &str = "FRACSOURCE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fracsource", version, about = "Forward and inverse experiments for fractional diffusion with separable sources")]
struct Cli {
    task: Task,
    /// Scenario name, for the `demo` task.
    name: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<String>,
    /// Mode count used by the task.
    #[arg(long)]
    modes: Option<usize>,
    /// Truncation tolerance (forward tail bound, blind-spot threshold).
    #[arg(long)]
    tolerance: Option<f64>,
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fracsource: {e}");
            e.exit_code()
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| CliError::config(THREADS_ENV, format!("expected a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::config(THREADS_ENV, e.to_string()))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if cli.modes == Some(0) {
        return Err(CliError::config("--modes", "must be at least 1"));
    }
    if let Some(t) = cli.tolerance {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::config("--tolerance", format!("must be positive, got {t}")));
        }
    }
    let ov = Overrides {
        modes: cli.modes,
        tolerance: cli.tolerance,
    };
    let pool = thread_pool()?;
    if cli.task == Task::Demo {
        let name = cli.name.as_deref().ok_or_else(|| {
            CliError::config("demo", format!("a demo name is required; available: {}", demo::DEMOS.join(", ")))
        })?;
        if cli.config.is_some() {
            return Err(CliError::config("--config", "demos are self-contained and take no config"));
        }
        let prefix = cli.out.clone().unwrap_or_else(|| name.to_string());
        let summary = pool.install(|| demo::run_demo(name, &prefix, ov))?;
        print!("{summary}");
        return Ok(());
    }
    if let Some(name) = &cli.name {
        return Err(CliError::config("<name>", format!("unexpected argument `{name}` for task {}", cli.task.as_str())));
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config", "a configuration file is required"))?;
    let cfg = config::load(path)?;
    if let Some(t) = cfg.task {
        if t != cli.task {
            return Err(CliError::config(
                "task",
                format!("config declares {} but {} was requested", t.as_str(), cli.task.as_str()),
            ));
        }
    }
    let prefix = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| cli.task.as_str().to_string());
    let mut run = Run::new(prefix);
    let result = pool.install(|| run_task(cli.task, &cfg, ov, &mut run));
    match result {
        Ok(_) => {
            run.finish();
            for p in run.artifacts.write()? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Err(e) if e.exit_code() == 2 => {
            run.artifacts.json("error.json", &e.diagnostic());
            run.finish();
            run.artifacts.write()?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}
