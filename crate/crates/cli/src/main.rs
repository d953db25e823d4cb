mod config;
mod gradcheck;

use std::fmt::{self, Write as _};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pgglonet::bench::{
    aggregate, run_experiment_with_traces, run_repetition, summary_report, write_records_csv,
    ExperimentConfig,
};
use pgglonet::objectives::registered_objectives;

const DEFAULT_OUT: &str = "pgglonet-out";
/// Largest dimension whose best point is printed inline.
const INLINE_X_MAX: usize = 32;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn invalid(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "pgglonet", version, about = "Progressive-growing GLOnet optimizer and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `algorithm.train.batch_size=50` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed of the run (optimize) or of the repetition seed stream (bench).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir`, then `pgglonet-out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only print errors.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one seeded optimization and write its trace.
    Optimize,
    /// Run every repetition of an experiment and write records and a summary.
    Bench,
    /// Compare analytic gradients with central finite differences.
    Gradcheck,
    /// List the registered objectives and their parameters.
    ListObjectives,
}

fn require_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = config::load_config(path, &cli.overrides)?;
    config.validate().map_err(invalid)?;
    config.objective.build().map_err(invalid)?;
    Ok(config)
}

fn output_dir(cli: &Cli, config: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Creates `dir` and writes the resolved config to `dir/config.json`.
fn prepare_output(dir: &Path, config: &ExperimentConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(config).map_err(runtime)?;
    std::fs::write(&path, text + "\n").map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn optimize(cli: &Cli) -> Result<(), CliError> {
    let mut config = require_config(cli)?;
    let seed = cli.seed.unwrap_or_else(|| config.seeds()[0]);
    config.repetitions = 1;
    config.seeds = Some(vec![seed]);
    let dir = output_dir(cli, &config);
    config.output_dir = Some(dir.clone());
    prepare_output(&dir, &config)?;

    let mut run_config = config.clone();
    run_config.record_best_x = true;
    let rep = run_repetition(&run_config, seed).map_err(runtime)?;
    let trace_path = dir.join("trace.csv");
    rep.trace.write_csv(&trace_path).map_err(runtime)?;
    let best_x = rep.record.best_x.clone().unwrap_or_default();
    let x_path = dir.join("best_x.txt");
    let x_text: String = best_x.iter().map(|v| format!("{v:?}\n")).collect();
    std::fs::write(&x_path, x_text).map_err(|e| runtime(format!("{}: {e}", x_path.display())))?;

    if !cli.quiet {
        let r = &rep.record;
        let mut text = String::new();
        let _ = writeln!(text, "objective    {} (d={})", r.objective, r.dim);
        let _ = writeln!(text, "algorithm    {}", r.algorithm);
        let _ = writeln!(text, "seed         {}", r.seed);
        let _ = writeln!(text, "evaluations  {}", r.evals_total);
        let _ = match r.evals_to_target {
            Some(e) => writeln!(text, "target       reached after {e} evaluations (eps {})", config.target_eps),
            None => writeln!(text, "target       not reached (eps {})", config.target_eps),
        };
        let _ = writeln!(text, "best f       {:?}", r.best_f);
        if best_x.len() <= INLINE_X_MAX {
            let xs: Vec<String> = best_x.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(text, "best x       [{}]", xs.join(", "));
        } else {
            let _ = writeln!(text, "best x       {}", x_path.display());
        }
        let _ = writeln!(text, "trace        {}", trace_path.display());
        emit(&text);
    }
    Ok(())
}

fn bench(cli: &Cli) -> Result<(), CliError> {
    let mut config = require_config(cli)?;
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
        config.seeds = None;
    }
    let dir = output_dir(cli, &config);
    config.output_dir = Some(dir.clone());
    prepare_output(&dir, &config)?;

    let reps = run_experiment_with_traces(&config).map_err(runtime)?;
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces).map_err(|e| runtime(format!("{}: {e}", traces.display())))?;
    for rep in &reps {
        rep.trace
            .write_csv(traces.join(format!("seed-{}.csv", rep.record.seed)))
            .map_err(runtime)?;
    }
    let records: Vec<_> = reps.into_iter().map(|r| r.record).collect();
    write_records_csv(&records, dir.join("records.csv")).map_err(runtime)?;
    let report = summary_report(&aggregate(&records));
    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, &report)
        .map_err(|e| runtime(format!("{}: {e}", summary_path.display())))?;
    if !cli.quiet {
        emit(&format!("{report}records      {}\n", dir.join("records.csv").display()));
    }
    Ok(())
}

fn gradcheck(cli: &Cli) -> Result<(), CliError> {
    let config = match cli.config {
        Some(_) => Some(require_config(cli)?),
        None => None,
    };
    let report = gradcheck::run(config.as_ref(), cli.seed.unwrap_or(0)).map_err(runtime)?;
    if !cli.quiet {
        let mut text = String::new();
        for c in report.objectives.iter().chain(&report.generators) {
            let _ = writeln!(text, "{:<60} {:.3e}", c.label, c.max_rel_error);
        }
        let _ = writeln!(
            text,
            "objectives   max rel err {:.3e} over {} cases (tolerance {:e})",
            report.objective_error(),
            report.objectives.len(),
            gradcheck::OBJECTIVE_TOL
        );
        let _ = writeln!(
            text,
            "generators   max rel err {:.3e} over {} cases (tolerance {:e})",
            report.generator_error(),
            report.generators.len(),
            gradcheck::GENERATOR_TOL
        );
        emit(&text);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Runtime("gradient check exceeded tolerance".into()))
    }
}

fn list_objectives() {
    let mut text = String::new();
    for info in registered_objectives() {
        let _ = writeln!(text, "{}\n    params: {}\n    {}", info.name, info.params, info.description);
    }
    emit(&text);
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Optimize => optimize(cli),
        Command::Bench => bench(cli),
        Command::Gradcheck => gradcheck(cli),
        Command::ListObjectives => {
            list_objectives();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
