//! Command-line interface.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use ppi_core::solver::minimize_rectified;
use ppi_core::tuning::{apply_policy, lambda_plugin};
use ppi_core::{estimate, EstimateConfig, LambdaPolicy, Loss, PpiError, SetShape, SolverOptions};
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{load_dataset, Estimand, IngestError};
use crate::scenario::{ScenarioKind, ScenarioSpec, DEFAULT_BIG_N, DEFAULT_DIM, DEFAULT_NS};
use crate::summary::{summarize, write_records_csv, write_summary_csv};
use crate::sweep::{run_sweep, Method, SweepConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Core(#[from] PpiError),
    #[error("{0}")]
    Output(String),
    #[error("solver did not converge (see diagnostics in the report)")]
    NotConverged,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) | CliError::Ingest(IngestError::Dataset(e)) if e.is_numerical() => 3,
            CliError::NotConverged => 4,
            _ => 2,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "ppi", version, about = "Prediction-powered inference with tuned lambda")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo coverage and width sweep on synthetic data.
    Simulate(SimulateArgs),
    /// Point estimate and confidence sets for a CSV dataset.
    Estimate(EstimateArgs),
    /// Plug-in lambda for a CSV dataset.
    Tune(TuneArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioKind,
    /// Noise levels; defaults to the scenario's standard grid.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
    /// Labeled sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Unlabeled sample size.
    #[arg(long = "N", default_value_t = DEFAULT_BIG_N)]
    pub big_n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Method::ALL.to_vec())]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Feature dimension of the regression scenarios.
    #[arg(long, default_value_t = DEFAULT_DIM)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub coord: usize,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Summary CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one row per trial and method.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

/// `tuned`, `one-step`, `fixed=<v>` or `aipw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyArg {
    Tuned,
    OneStep,
    Fixed(f64),
    Aipw,
}

impl FromStr for PolicyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tuned" => Ok(PolicyArg::Tuned),
            "one-step" => Ok(PolicyArg::OneStep),
            "aipw" => Ok(PolicyArg::Aipw),
            _ => {
                let v = s
                    .strip_prefix("fixed=")
                    .ok_or_else(|| format!("unknown lambda policy {s:?}; expected tuned, one-step, fixed=<v> or aipw"))?;
                v.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(PolicyArg::Fixed)
                    .ok_or_else(|| format!("cannot parse fixed lambda {v:?}"))
            }
        }
    }
}

impl PolicyArg {
    /// `tuned` picks clipping or pass-through from the loss's convexity range.
    pub fn resolve(self, loss: &dyn Loss) -> LambdaPolicy {
        match self {
            PolicyArg::Tuned => LambdaPolicy::default_for(loss),
            PolicyArg::OneStep => LambdaPolicy::OneStep,
            PolicyArg::Fixed(v) => LambdaPolicy::Fixed(v),
            PolicyArg::Aipw => LambdaPolicy::AipwPreset,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long)]
    pub unlabeled: PathBuf,
    #[arg(long, value_enum)]
    pub estimand: Estimand,
    /// Class count for the multiclass estimand; labels are 0-based.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long = "lambda-policy", default_value = "tuned")]
    pub lambda_policy: PolicyArg,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long = "set", value_enum, value_delimiter = ',', default_values_t = vec![SetShapeArg::Interval])]
    pub sets: Vec<SetShapeArg>,
    #[arg(long, default_value_t = 0)]
    pub coord: usize,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 4 when the solver does not converge.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SetShapeArg {
    Interval,
    Rectangle,
    Ellipse,
}

impl From<SetShapeArg> for SetShape {
    fn from(s: SetShapeArg) -> Self {
        match s {
            SetShapeArg::Interval => SetShape::Interval,
            SetShapeArg::Rectangle => SetShape::Rectangle,
            SetShapeArg::Ellipse => SetShape::Ellipse,
        }
    }
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Fixed lambda of the pilot fit.
    #[arg(long = "pilot-lambda", default_value_t = 1.0)]
    pub pilot_lambda: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TuneReport {
    lambda_raw: f64,
    lambda_clipped: f64,
    numerator: f64,
    denominator: f64,
    degenerate: bool,
    ratio: f64,
    pilot_theta: Vec<f64>,
    pilot_converged: bool,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Output(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let sigmas = if args.sigma.is_empty() { args.scenario.default_sigmas().to_vec() } else { args.sigma.clone() };
    let ns = if args.n.is_empty() { DEFAULT_NS.to_vec() } else { args.n.clone() };
    let specs: Vec<ScenarioSpec> = sigmas
        .iter()
        .flat_map(|&s| ns.iter().map(move |&n| (s, n)))
        .map(|(s, n)| ScenarioSpec::new(args.scenario, s, n, args.big_n, args.alpha, args.seed).with_dim(args.d))
        .collect();
    let config = SweepConfig {
        specs,
        methods: args.methods.clone(),
        trials: args.trials,
        master_seed: args.seed,
        coord: args.coord,
        workers: args.workers,
    };
    let records = run_sweep(&config)?;
    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} trial fits failed and are excluded", records.len());
    }
    if let Some(path) = &args.records {
        write_records_csv(&records, sink(Some(path))?)?;
    }
    write_summary_csv(&summarize(&records, args.seed), sink(args.out.as_deref())?)?;
    Ok(())
}

pub fn estimate_command(args: &EstimateArgs) -> Result<(), CliError> {
    let (data, loss) = load_dataset(&args.data.labeled, &args.data.unlabeled, args.data.estimand, args.data.classes)?;
    let mut config = EstimateConfig::new(args.lambda_policy.resolve(loss.as_ref()), args.alpha);
    config.shapes = args.sets.iter().map(|&s| s.into()).collect();
    config.coord = args.coord;
    let report = estimate(loss.as_ref(), &data, &config)?;
    write_json(&report, args.out.as_deref())?;
    if !report.diagnostics.converged {
        if args.strict {
            return Err(CliError::NotConverged);
        }
        eprintln!("warning: solver did not converge");
    }
    Ok(())
}

pub fn tune(args: &TuneArgs) -> Result<(), CliError> {
    let (data, loss) = load_dataset(&args.data.labeled, &args.data.unlabeled, args.data.estimand, args.data.classes)?;
    let pilot = minimize_rectified(loss.as_ref(), &data, args.pilot_lambda, &SolverOptions::default())?;
    let raw = lambda_plugin(loss.as_ref(), &data, pilot.theta.as_slice())?;
    let clipped = apply_policy(&raw, LambdaPolicy::ClipUnit);
    let report = TuneReport {
        lambda_raw: raw.lambda_raw,
        lambda_clipped: clipped.lambda_used,
        numerator: raw.numerator,
        denominator: raw.denominator,
        degenerate: raw.degenerate,
        ratio: data.ratio().value(),
        pilot_theta: raw.pilot_theta.clone(),
        pilot_converged: pilot.diagnostics.converged,
    };
    write_json(&report, args.out.as_deref())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate_command(a),
        Command::Tune(a) => tune(a),
    }
}
