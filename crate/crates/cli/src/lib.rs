//! Command-line front end for the freeway simulator.

pub mod plot;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use metanet_core::builtin::{builtin, BUILTIN_NAMES};
use metanet_core::scenario::{apply_overrides, load_scenario, scenario_to_string, Override};
use metanet_core::{
    run_spec, validate, CsvTrace, ModelKind, NetworkSpec, RunOptions, RunSummary, SimError, TraceRecord,
};
use thiserror::Error;

use crate::plot::{default_quantities, emit_plot_data, Quantity};

pub const OUT_DIR_ENV: &str = "METANET_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "metanet", version, about = "Freeway simulation with service stations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write traces, plot series and summaries.
    Run(RunArgs),
    /// Check a scenario and report every violation.
    Validate(SourceArgs),
    /// Print a scenario as TOML.
    Scenario(SourceArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct SourceGroup {
    /// Scenario file (TOML).
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long, value_name = "NAME", value_parser = clap::builder::PossibleValuesParser::new(BUILTIN_NAMES))]
    pub builtin: Option<String>,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    #[command(flatten)]
    pub source: SourceGroup,
    /// Parameter override as a dot path, e.g. `station.dwell_steps=3750`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<Override>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::MetanetS)]
    pub model: ModelArg,
    /// Output directory; one subdirectory per model.
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Number of steps to simulate instead of the scenario horizon.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Record every n-th step.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: u64,
    /// Comma-separated plot series such as `q_m5,rho_s2,l_st`; defaults to
    /// the figure quantities of a built-in scenario.
    #[arg(long, value_delimiter = ',')]
    pub plot: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    #[value(name = "metanet_s")]
    MetanetS,
    #[value(name = "ctm_s")]
    CtmS,
    Both,
}

impl ModelArg {
    pub fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelArg::MetanetS => vec![ModelKind::MetanetS],
            ModelArg::CtmS => vec![ModelKind::CtmS],
            ModelArg::Both => vec![ModelKind::MetanetS, ModelKind::CtmS],
        }
    }
}

/// A fully resolved `run` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: NetworkSpec,
    pub models: Vec<ModelKind>,
    pub out: PathBuf,
    pub options: RunOptions,
    pub quantities: Vec<Quantity>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Simulation(#[from] SimError),
    #[error("output: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Simulation(_) | CliError::Io(_) => 1,
        }
    }
}

/// Parses `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

/// Loads the scenario and applies the overrides.
pub fn resolve_spec(args: &SourceArgs) -> Result<NetworkSpec, CliError> {
    let usage = |e: &dyn std::fmt::Display| CliError::Usage(e.to_string());
    let spec = match (&args.source.scenario, &args.source.builtin) {
        (Some(path), _) => load_scenario(path).map_err(|e| usage(&format!("{}: {e}", path.display())))?,
        (None, Some(name)) => builtin(name).ok_or_else(|| usage(&format!("unknown built-in scenario {name}")))?,
        (None, None) => return Err(usage(&"a scenario file or built-in name is required")),
    };
    apply_overrides(&spec, &args.overrides).map_err(|e| usage(&e))
}

pub fn resolve_run(args: &RunArgs) -> Result<RunConfig, CliError> {
    let spec = resolve_spec(&args.source)?;
    let report = validate(&spec);
    if !report.is_ok() {
        return Err(CliError::Usage(format!("invalid scenario:\n{report}")));
    }
    let quantities = match &args.plot {
        Some(names) => names
            .iter()
            .filter(|n| !n.is_empty())
            .map(|n| n.parse::<Quantity>().map_err(CliError::Usage))
            .collect::<Result<_, _>>()?,
        None => args.source.source.builtin.as_deref().map(default_quantities).unwrap_or_default(),
    };
    Ok(RunConfig {
        spec,
        models: args.model.kinds(),
        out: args.out.clone(),
        options: RunOptions { stride: args.stride, horizon: args.horizon },
        quantities,
    })
}

/// Runs one model, writing `trace.csv`, the series files and
/// `summary.toml` into `dir`.
pub fn run_model(cfg: &RunConfig, kind: ModelKind, dir: &Path) -> Result<RunSummary, CliError> {
    fs::create_dir_all(dir)?;
    let mut csv = CsvTrace::new(BufWriter::new(fs::File::create(dir.join("trace.csv"))?));
    let mut rows: Vec<TraceRecord> = Vec::new();
    let summary = run_spec(&cfg.spec, kind, &mut [&mut csv, &mut rows], &cfg.options)?;
    emit_plot_data(&rows, &cfg.quantities, &summary, dir)?;
    Ok(summary)
}

/// Runs every requested model concurrently.
pub fn execute_run(cfg: &RunConfig) -> Result<Vec<RunSummary>, CliError> {
    std::thread::scope(|s| {
        let handles: Vec<_> =
            cfg.models.iter().map(|&kind| s.spawn(move || run_model(cfg, kind, &cfg.out.join(kind.name())))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    })
}

fn summary_line(s: &RunSummary) -> String {
    format!(
        "{}: {} steps, residual {:.3e} veh, {} clamp events",
        s.model, s.steps, s.conservation_residual_veh, s.clamp_events
    )
}

/// Executes a parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => {
            let cfg = resolve_run(args)?;
            for s in execute_run(&cfg)? {
                writeln!(out, "{}", summary_line(&s))?;
            }
            writeln!(out, "results in {}", cfg.out.display())?;
        }
        Command::Validate(args) => {
            let report = validate(&resolve_spec(args)?);
            if !report.is_ok() {
                return Err(CliError::Usage(format!("invalid scenario:\n{report}")));
            }
            writeln!(out, "ok")?;
        }
        Command::Scenario(args) => {
            let text = scenario_to_string(&resolve_spec(args)?).map_err(|e| CliError::Usage(e.to_string()))?;
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
