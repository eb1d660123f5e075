//! `accel`: run accelerated methods, write traces, certify Lyapunov bounds.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 certification
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use accel_core::harness::{
    self, exit_code, EnergyFormChoice, ExperimentConfig, InitialPoint, Outcome, TraceFormat,
};
use accel_core::Algorithm;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "accel",
    version,
    about = "Accelerated forward-backward methods with Lyapunov certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment from flags or a JSON config file.
    Run(RunArgs),
    /// Run a named experiment group (fig1, fig2) into a directory.
    Preset(PresetArgs),
    /// Re-certify a JSON trace written by `run` or `preset`.
    Certify(CertifyArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment config; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// quad2d, quad-diag:<c1,c2,...>, lasso:<path> or a lasso .json file.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    step: Option<f64>,
    /// Momentum parameter r (required by the NAG and FISTA families).
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// `ones` or comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<InitialPoint>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<TraceFormat>,
    #[arg(long)]
    certify: bool,
    /// auto, velocity or xy.
    #[arg(long)]
    energy_form: Option<EnergyFormChoice>,
}

#[derive(Debug, Args)]
struct PresetArgs {
    name: String,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, default_value = "csv")]
    format: TraceFormat,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    problem: String,
    #[arg(long, default_value = "auto")]
    energy_form: EnergyFormChoice,
    /// Where to write the certificate JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(args: RunArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => {
            let problem = args
                .problem
                .clone()
                .context("--problem is required without --config")?;
            let algo = args.algo.context("--algo is required without --config")?;
            let step = args.step.context("--step is required without --config")?;
            ExperimentConfig::new(&problem, algo, step, args.r)
        }
    };
    if let Some(problem) = args.problem {
        config.problem = problem;
    }
    if let Some(algo) = args.algo {
        config.algo = algo;
    }
    if let Some(step) = args.step {
        config.step = step;
    }
    if args.r.is_some() {
        config.momentum_r = args.r;
    }
    if let Some(iters) = args.iters {
        config.iters = iters;
    }
    if let Some(x0) = args.x0 {
        config.x0 = x0;
    }
    if let Some(trace) = args.trace {
        config.outputs.trace_path = Some(trace);
    }
    if let Some(certificate) = args.certificate {
        config.outputs.certificate_path = Some(certificate);
        config.certify = true;
    }
    if let Some(format) = args.format {
        config.outputs.format = format;
    }
    if args.certify {
        config.certify = true;
    }
    if let Some(form) = args.energy_form {
        config.energy_form = form;
    }
    Ok(config)
}

fn report(outcome: &Outcome) -> i32 {
    println!("{}", outcome.summary());
    outcome.exit_code()
}

fn run(args: RunArgs) -> Result<i32> {
    let config = build_config(args)?;
    let outcome = harness::run_experiment(&config)?;
    Ok(report(&outcome))
}

fn preset(args: PresetArgs) -> Result<i32> {
    let configs = harness::preset_in(&args.name, &args.outdir, args.format)?;
    let mut code = exit_code::SUCCESS;
    for outcome in harness::run_all(&configs) {
        code = code.max(report(&outcome?));
    }
    Ok(code)
}

fn certify(args: CertifyArgs) -> Result<i32> {
    let (trace, cert) = harness::certify_trace_file(&args.trace, &args.problem, args.energy_form)?;
    if let Some(out) = &args.out {
        harness::write_certificate(&cert, out)?;
    }
    match cert.first_failure() {
        None => {
            println!(
                "{} trace of {} records: certificate pass (K = {})",
                trace.params.algo,
                trace.len(),
                cert.threshold_k
            );
            Ok(exit_code::SUCCESS)
        }
        Some(k) => {
            println!(
                "{} trace of {} records: certificate FAIL at k = {k}",
                trace.params.algo,
                trace.len()
            );
            Ok(exit_code::CERTIFICATION_FAILED)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let usage = err.use_stderr();
            let _ = err.print();
            return ExitCode::from(if usage { exit_code::USAGE as u8 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Preset(args) => preset(args),
        Command::Certify(args) => certify(args),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code::USAGE as u8)
        }
    }
}
