use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use wwlab_harness::config::{ExperimentConfig, ExperimentKind, OutputFormat};
use wwlab_harness::experiments;
use wwlab_harness::report::ScalingReport;

/// Pseudospectral laboratory for fully dispersive shallow-water wave models.
#[derive(Parser)]
#[command(name = "wwlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted and the config names no output
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Worker threads for the sweep (0 = library default)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Seed override for the run's random fields
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one model and record observer rows
    Simulate(RunArgs),
    /// Residual scaling of the diagonalized / Whitham consistency claims
    Consistency(RunArgs),
    /// One-sided (well-prepared) approximation error growth
    Corollary(RunArgs),
    /// Full normal-form pipeline: initial mismatch and equation defect
    Pipeline(RunArgs),
    /// Invariant suites (one pass/fail verdict per invariant)
    Suites(RunArgs),
    /// Re-render a saved JSON report
    Report {
        /// Saved JSON report
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv | json
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

fn parse_format(s: &str) -> anyhow::Result<OutputFormat> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => bail!("unknown format {other:?} (expected csv or json)"),
    }
}

fn load_config(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    ExperimentConfig::from_toml(&text)
}

fn emit(report: &ScalingReport, args: &RunArgs, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let format = match &args.format {
        Some(s) => parse_format(s)?,
        None => cfg.output.as_ref().map(|o| o.format).unwrap_or(OutputFormat::Csv),
    };
    let body = match format {
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Json => report.to_json(),
    };
    let path = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| PathBuf::from(&o.path)));
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{body}"),
    }
    eprint!("{}", report.verdict_lines());
    Ok(())
}

fn expect_kind(cfg: &ExperimentConfig, allowed: &[ExperimentKind], sub: &str) -> anyhow::Result<()> {
    if allowed.contains(&cfg.experiment) {
        Ok(())
    } else {
        bail!(
            "`{sub}` expects experiment one of {:?}, config says {:?}",
            allowed.iter().map(|k| k.name()).collect::<Vec<_>>(),
            cfg.experiment.name()
        )
    }
}

fn run() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load_config(&args)?;
            let seed = args.seed.unwrap_or(cfg.seeds);
            let report = experiments::run_simulate(&cfg, seed)?;
            emit(&report, &args, &cfg)?;
            Ok(report.all_pass())
        }
        Command::Consistency(args) => {
            let cfg = load_config(&args)?;
            expect_kind(
                &cfg,
                &[ExperimentKind::ConsistencyDiag, ExperimentKind::ConsistencyWhitham],
                "consistency",
            )?;
            let seed = args.seed.unwrap_or(cfg.seeds);
            let report = experiments::run(&cfg, seed, args.workers)?;
            emit(&report, &args, &cfg)?;
            Ok(report.all_pass())
        }
        Command::Corollary(args) => {
            let cfg = load_config(&args)?;
            expect_kind(&cfg, &[ExperimentKind::CorollaryOnesided], "corollary")?;
            let seed = args.seed.unwrap_or(cfg.seeds);
            let report = experiments::run(&cfg, seed, args.workers)?;
            emit(&report, &args, &cfg)?;
            Ok(report.all_pass())
        }
        Command::Pipeline(args) => {
            let cfg = load_config(&args)?;
            expect_kind(&cfg, &[ExperimentKind::TheoremPipeline], "pipeline")?;
            let seed = args.seed.unwrap_or(cfg.seeds);
            let report = experiments::run(&cfg, seed, args.workers)?;
            emit(&report, &args, &cfg)?;
            Ok(report.all_pass())
        }
        Command::Suites(args) => {
            let cfg = load_config(&args)?;
            let seed = args.seed.unwrap_or(cfg.seeds);
            // aggregates all three suites; a single suite can still be run
            // through the specific experiment value + the library API
            let report = experiments::run_all_suites(&cfg, seed, args.workers)?;
            emit(&report, &args, &cfg)?;
            Ok(report.all_pass())
        }
        Command::Report { input, out, format } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let report: ScalingReport = serde_json::from_str(&text).context("parsing report")?;
            let body = match parse_format(&format)? {
                OutputFormat::Csv => report.to_csv(),
                OutputFormat::Json => report.to_json(),
            };
            match out {
                Some(p) => fs::write(&p, body)?,
                None => print!("{body}"),
            }
            eprint!("{}", report.verdict_lines());
            Ok(report.all_pass())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2), // completed, but some verdicts failed
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
