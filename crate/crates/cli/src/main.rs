//! `elicit`: Murphy curves, elementary-score fits, Pareto filtering and
//! calibration diagnostics from the command line.
//!
//! Exit codes: 0 success (and calibration pass), 1 computation error,
//! 2 usage, parse or configuration error, 3 calibration fail.

// `!(a < b)` deliberately rejects NaN along with the failed comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod grid;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use elicit::synthetic::ExampleKind;
use elicit::{FunctionalSpec, MixtureMeasure};

use crate::config::{parse_beta, parse_model, RunConfig};
use crate::grid::Range;

#[derive(Parser)]
#[command(
    name = "elicit",
    version,
    about = "Elementary scores, Murphy curves and calibration diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Murphy curve of fixed predictions: CSV `eta,value,value_right`.
    Murphy(Flags),
    /// Minimise a mixture loss: JSON fit result.
    Fit(Flags),
    /// Elementary-score fits over an η grid: CSV.
    Scan(Flags),
    /// Pareto filter over candidate parameters: CSV, optional JSON.
    Pareto(Flags),
    /// Binned calibration diagnostic: JSON report; exit 3 on fail.
    Calibrate(Flags),
    /// Seeded synthetic dataset: CSV `x1,y`.
    Simulate(Flags),
    /// Analytic minimisers for the synthetic examples: CSV.
    Oracle(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Murphy(_) => "murphy",
            Command::Fit(_) => "fit",
            Command::Scan(_) => "scan",
            Command::Pareto(_) => "pareto",
            Command::Calibrate(_) => "calibrate",
            Command::Simulate(_) => "simulate",
            Command::Oracle(_) => "oracle",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Murphy(f)
            | Command::Fit(f)
            | Command::Scan(f)
            | Command::Pareto(f)
            | Command::Calibrate(f)
            | Command::Simulate(f)
            | Command::Oracle(f) => f,
        }
    }
}

/// Flags shared by every command; each overrides the `--config` value.
#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON config, or an earlier output whose echoed config is reused.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV with columns x1..xd,y.
    #[arg(long)]
    data: Option<PathBuf>,
    /// mean | moment2 | quantile:α | expectile:τ
    #[arg(long)]
    functional: Option<FunctionalSpec>,
    /// constant | linear[:d] | linear-nointercept[:d] | linear-positive[:d] | JSON
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated parameter vector.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Mixing measure as JSON `{"atoms":[[eta,w]],"segments":[[lo,hi,density]]}`.
    #[arg(long)]
    mixture: Option<String>,
    /// η grid `lo:hi:step`.
    #[arg(long, allow_hyphen_values = true)]
    eta_grid: Option<Range>,
    #[arg(long)]
    seed: Option<u64>,
    /// Main output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Additional SVG plot.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Additional JSON output (pareto).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Additional `bin_center,standardized_mean` CSV (calibrate).
    #[arg(long)]
    plot_csv: Option<PathBuf>,
    /// Dominance tolerance; default is twice the half-sample standard error.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    /// Equal-width instead of equal-count bins.
    #[arg(long)]
    equal_width: bool,
    #[arg(long)]
    z_threshold: Option<f64>,
    /// Half-width of the η window used by multi-parameter elementary fits;
    /// chosen from the data when absent.
    #[arg(long)]
    eta_window: Option<f64>,
    #[arg(long)]
    starts: Option<usize>,
    /// Points of the one-dimensional pre-scan grid.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    xtol: Option<f64>,
    #[arg(long)]
    max_evals: Option<usize>,
    /// Midpoints inserted between Murphy-curve knots.
    #[arg(long)]
    refinement: Option<usize>,
    /// quadratic | logistic | cubic
    #[arg(long)]
    example: Option<ExampleKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Candidate grid `b0=lo:hi:step,b1=lo:hi:step`.
    #[arg(long, allow_hyphen_values = true)]
    candidates: Option<String>,
    /// Candidate CSV with columns b0,b1,...
    #[arg(long)]
    candidates_file: Option<PathBuf>,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = Some(v.clone());
                }
            )*};
        }
        set!(
            data,
            eta_grid,
            example,
            n,
            noise_sd,
            candidates,
            candidates_file,
            out,
            svg,
            json,
            plot_csv
        );
        if let Some(v) = self.functional {
            cfg.functional = v;
        }
        if let Some(s) = &self.model {
            cfg.model = parse_model(s)?;
        }
        if let Some(s) = &self.beta {
            cfg.beta = Some(parse_beta(s)?);
        }
        if let Some(s) = &self.mixture {
            cfg.mixture =
                Some(serde_json::from_str::<MixtureMeasure>(s).context("invalid --mixture JSON")?);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.tol {
            cfg.tolerance = Some(v);
        }
        if let Some(v) = self.bins {
            cfg.bins = v;
        }
        if self.equal_width {
            cfg.equal_width = true;
        }
        if let Some(v) = self.z_threshold {
            cfg.z_threshold = v;
        }
        if let Some(v) = self.refinement {
            cfg.refinement = v;
        }
        let opt = &mut cfg.optimizer;
        if let Some(v) = self.eta_window {
            opt.eta_window = Some(v);
        }
        if let Some(v) = self.starts {
            opt.starts = v;
        }
        if let Some(v) = self.grid {
            opt.grid = v;
        }
        if let Some(v) = self.xtol {
            opt.xtol = v;
        }
        if let Some(v) = self.max_evals {
            opt.max_evals = v;
        }
        Ok(cfg)
    }
}

/// How a command failed.
pub enum Failure {
    /// Bad flags, config or input files: exit 2.
    Usage(anyhow::Error),
    /// A well-formed request that could not be computed: exit 1.
    Compute(anyhow::Error),
}

/// Maps an error into a [`Failure`] class.
pub trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn compute(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn compute(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Compute(e.into()))
    }
}

/// Result of a command that completed.
pub enum Outcome {
    Ok,
    CalibrationFail,
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("ELICIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .with_context(|| format!("ELICIT_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    configure_threads().usage()?;
    let cfg = cli.command.flags().resolve().usage()?;
    match &cli.command {
        Command::Murphy(_) => commands::murphy(cfg),
        Command::Fit(_) => commands::fit(cfg),
        Command::Scan(_) => commands::scan(cfg),
        Command::Pareto(_) => commands::pareto(cfg),
        Command::Calibrate(_) => commands::calibrate(cfg),
        Command::Simulate(_) => commands::simulate(cfg),
        Command::Oracle(_) => commands::oracle(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CalibrationFail) => ExitCode::from(3),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            let mut cmd = Cli::command();
            cmd.build();
            if let Some(sub) = cmd.find_subcommand_mut(cli.command.name()) {
                eprintln!("\n{}", sub.render_usage());
            }
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
