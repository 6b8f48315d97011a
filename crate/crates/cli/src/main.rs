use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use vcsim_core::scenario::{check_run, load_scenario, replay_check, Metrics, ReplayVerdict};
use vcsim_core::{Scenario, SimError, Simulation};

/// Value-chain simulator.
#[derive(Parser)]
#[command(name = "vcsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario to quiescence and report metrics.
    Run {
        /// Scenario file. Omit when using --batch.
        #[arg(required_unless_present = "batch", conflicts_with = "batch")]
        scenario: Option<PathBuf>,
        /// Write the event log here. A directory in batch mode.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Check the run's invariants; exit 2 on any violation.
        #[arg(long)]
        check: bool,
        /// Write metrics JSON here instead of stdout. A directory in batch mode.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Run every `*.json` scenario in a directory, in parallel.
        #[arg(long, value_name = "DIR")]
        batch: Option<PathBuf>,
    },
    /// Load and validate a scenario without running it.
    Validate { scenario: PathBuf },
    /// Run a scenario twice and compare the logs byte for byte.
    Replay { scenario: PathBuf },
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Invariant(String),
    Livelock(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Invariant(_) => 2,
            Failure::Livelock(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Invariant(m) | Failure::Livelock(m) => m,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::EventBudgetExceeded(_) => Failure::Livelock(e.to_string()),
            other => Failure::Invariant(other.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Validation(format!("{e:#}"))
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

struct RunOptions<'a> {
    log: Option<&'a Path>,
    metrics: Option<&'a Path>,
    check: bool,
}

/// Runs one scenario and returns the metrics JSON it produced.
fn run_one(path: &Path, opts: &RunOptions<'_>) -> Result<String, Failure> {
    let scenario = load(path)?;
    let outcome = Simulation::new(&scenario).run()?;
    let text = outcome.log.render();
    if let Some(out) = opts.log {
        fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    }
    let metrics = Metrics::from_log(&outcome.log)
        .map_err(|e| Failure::Invariant(format!("metrics: {e}")))?;
    let json = metrics.to_json().to_string();
    if let Some(out) = opts.metrics {
        fs::write(out, format!("{json}\n")).with_context(|| format!("writing {}", out.display()))?;
    }
    if opts.check {
        let violations = check_run(&outcome);
        if !violations.is_empty() {
            let lines: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Failure::Invariant(lines.join("\n")));
        }
    }
    Ok(json)
}

fn batch(dir: &Path, log: Option<&Path>, metrics: Option<&Path>, check: bool) -> Result<u8, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    for out in [log, metrics].into_iter().flatten() {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    }
    let results: Vec<(PathBuf, Result<String, Failure>)> = files
        .into_par_iter()
        .map(|path| {
            let stem = path.file_stem().unwrap_or_default().to_owned();
            let log_path = log.map(|d| d.join(&stem).with_extension("log"));
            let metrics_path = metrics.map(|d| d.join(&stem).with_extension("json"));
            let opts = RunOptions {
                log: log_path.as_deref(),
                metrics: metrics_path.as_deref(),
                check,
            };
            let result = run_one(&path, &opts);
            (path, result)
        })
        .collect();
    let mut worst = 0;
    for (path, result) in results {
        match result {
            Ok(json) => println!("{} ok {json}", path.display()),
            Err(f) => {
                println!("{} failed({}) {}", path.display(), f.code(), f.message().replace('\n', "; "));
                worst = worst.max(f.code());
            }
        }
    }
    Ok(worst)
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Run {
            scenario,
            log,
            check,
            metrics,
            batch: Some(dir),
        } => {
            debug_assert!(scenario.is_none());
            batch(&dir, log.as_deref(), metrics.as_deref(), check)
        }
        Command::Run {
            scenario,
            log,
            check,
            metrics,
            batch: None,
        } => {
            let path = scenario.expect("clap requires a scenario without --batch");
            let opts = RunOptions {
                log: log.as_deref(),
                metrics: metrics.as_deref(),
                check,
            };
            let json = run_one(&path, &opts)?;
            if metrics.is_none() {
                println!("{json}");
            }
            Ok(0)
        }
        Command::Validate { scenario } => {
            let s = load(&scenario)?;
            println!(
                "{}: ok ({} parties, {} warehouses, {} manufacturers, {} customers, {} orders)",
                scenario.display(),
                s.registry.parties().count(),
                s.warehouses.len(),
                s.manufacturers.len(),
                s.customers.len(),
                s.orders.len()
            );
            Ok(0)
        }
        Command::Replay { scenario } => {
            let s = load(&scenario)?;
            match replay_check(&s)? {
                ReplayVerdict::Pass { lines } => {
                    println!("replay ok: {lines} identical lines");
                    Ok(0)
                }
                ReplayVerdict::Fail {
                    line,
                    first,
                    second,
                } => Err(Failure::Invariant(format!(
                    "replay differs at line {line}\n- {first}\n+ {second}"
                ))),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit 2 is reserved for invariant violations.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("vcsim: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
