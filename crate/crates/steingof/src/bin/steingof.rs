//! Command-line front end.
//!
//! Exit codes: 0 = retain/pass, 2 = reject/fail, 1 = any error. All
//! configuration is explicit in flags and files; the environment is never
//! consulted, so identical invocations produce identical bytes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use steingof::baselines::{ks_test_model, mmd_bootstrap_test};
use steingof::bench::{run_benchmark, score_check, ExperimentConfig, MethodSpec};
use steingof::error::Error;
use steingof::htest::{ksd_bootstrap_test, ksd_linear_test, ksd_spectral_test, LinearScaling};
use steingof::kernel::Bandwidth;
use steingof::model::ModelSpec;
use steingof::report::{Decision, TestReport};
use steingof::sample::{SampleFormat, SampleSet};
use steingof::Result;

#[derive(Parser)]
#[command(
    name = "steingof",
    version,
    about = "Goodness-of-fit tests for unnormalized models via the kernelized Stein discrepancy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether a sample is drawn from a model.
    Test {
        /// Sample file (.csv, or .ndjson/.jsonl for newline-delimited JSON).
        #[arg(long)]
        sample: PathBuf,
        /// Model spec JSON file.
        #[arg(long)]
        model: PathBuf,
        /// One of: ksd-bootstrap, ksd-linear, ksd-spectral, ks.
        #[arg(long)]
        method: MethodSpec,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bootstrap replicates (ksd-bootstrap only).
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        /// Kernel bandwidth: "median" or a positive number.
        #[arg(long, default_value = "median")]
        bandwidth: Bandwidth,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Null-distribution draws (ksd-spectral only).
        #[arg(long, default_value_t = 100_000)]
        spectral_draws: usize,
        /// Threshold scaling (ksd-linear only): standardized-mean or raw-sigma.
        #[arg(long, default_value = "standardized-mean")]
        linear_scaling: LinearScaling,
    },
    /// Run a configured error-rate benchmark sweep.
    Benchmark {
        /// Experiment config JSON file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv, trials.ndjson, manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-sample MMD test with a pooled permutation null.
    MmdTest {
        #[arg(long)]
        sample_x: PathBuf,
        #[arg(long)]
        sample_y: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        /// Kernel bandwidth: "median" (of the pooled sample) or a number.
        #[arg(long, default_value = "median")]
        bandwidth: Bandwidth,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Audit a model's score against finite differences of its density.
    ScoreCheck {
        /// Model spec JSON file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_sample(path: &Path) -> Result<SampleSet> {
    SampleSet::load(path, SampleFormat::from_path(path))
}

fn decision_code(decision: Decision) -> ExitCode {
    match decision {
        Decision::Retain => ExitCode::SUCCESS,
        Decision::Reject => ExitCode::from(2),
    }
}

fn emit(report: &TestReport) -> Result<ExitCode> {
    println!("{}", report.to_json_pretty()?);
    Ok(decision_code(report.decision))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Test {
            sample,
            model,
            method,
            alpha,
            bootstrap,
            bandwidth,
            seed,
            spectral_draws,
            linear_scaling,
        } => {
            let sample = load_sample(&sample)?;
            let model = ModelSpec::load(&model)?.build()?;
            let report = match method {
                MethodSpec::KsdBootstrap => {
                    ksd_bootstrap_test(&model, bandwidth, &sample, alpha, bootstrap, seed)?
                }
                MethodSpec::KsdLinear => {
                    ksd_linear_test(&model, bandwidth, &sample, alpha, linear_scaling)?
                }
                MethodSpec::KsdSpectral => {
                    ksd_spectral_test(&model, bandwidth, &sample, alpha, spectral_draws, seed)?
                }
                MethodSpec::Ks => ks_test_model(&model, &sample, alpha)?,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "method {other} needs inputs `test` does not take; \
                         use `mmd-test` for two-sample tests or `benchmark` for oracle baselines"
                    )))
                }
            };
            emit(&report)
        }
        Command::Benchmark { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let summary = run_benchmark(&config, &out)?;
            println!(
                "wrote {} rate rows to {}",
                summary.rows.len(),
                out.join("results.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::MmdTest { sample_x, sample_y, alpha, bootstrap, bandwidth, seed } => {
            let x = load_sample(&sample_x)?;
            let y = load_sample(&sample_y)?;
            let report = mmd_bootstrap_test(bandwidth, &x, &y, alpha, bootstrap, seed)?;
            emit(&report)
        }
        Command::ScoreCheck { model, points, seed } => {
            let model = ModelSpec::load(&model)?.build()?;
            let report = score_check(&model, points, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
