//! `qhs` — batch experiment runner for the QHS simulator.
//!
//! Exit codes: 0 success, 2 config error, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qhs_core::algorithms::{records_match, replay_record};
use qhs_core::harness::{
    log_is_complete, parse_config_path, read_log, run_experiment, Algorithm, ExperimentConfig,
    ReportFormat,
};
use qhs_core::Error;

#[derive(Parser)]
#[command(
    name = "qhs",
    version,
    about = "Quantum hidden subgroup algorithm simulator and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Period finding on a discretized real window (continued-fraction recovery)
    AlgR(RunArgs),
    /// Period finding on Z_Q, the finite stand-in for the circle (gcd recovery)
    AlgCircle(RunArgs),
    /// Hidden-subspace finding on Z_p^n (orthogonal-complement sampling)
    AlgSubspace(RunArgs),
    /// Batch of alg-circle experiments across a divisor set
    DualShorSweep(RunArgs),
    /// Re-execute a persisted run log and verify it reproduces itself
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config (strict schema; see README)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's trial count
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory (default: the config's output_dir, else ./qhs-runs)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json or csv
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Run log (trials.jsonl) to re-execute
    #[arg(long)]
    log: PathBuf,
    /// Optional config to check the log for completeness against
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::AlgR(args) => run(Algorithm::AlgR, args),
        Command::AlgCircle(args) => run(Algorithm::AlgCircle, args),
        Command::AlgSubspace(args) => run(Algorithm::AlgSubspace, args),
        Command::DualShorSweep(args) => run(Algorithm::DualShorSweep, args),
        Command::Replay(args) => replay(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<(), Error> {
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(fmt) = &args.format {
        cfg.report_format = match fmt.as_str() {
            "json" => ReportFormat::Json,
            "csv" => ReportFormat::Csv,
            other => return Err(Error::config(format!("unknown report format {other:?}"))),
        };
    }
    Ok(())
}

fn run(expected: Algorithm, args: RunArgs) -> Result<(), Error> {
    let mut cfg = parse_config_path(&args.config)?;
    if cfg.algorithm != expected {
        return Err(Error::config(format!(
            "config is for {}, but the {} subcommand was invoked",
            cfg.algorithm.name(),
            expected.name()
        )));
    }
    apply_overrides(&mut cfg, &args)?;
    let out_dir = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("qhs-runs").join(cfg.algorithm.name()));

    let (records, stats) = run_experiment(&cfg, &out_dir)?;
    println!(
        "wrote {} trial records to {}",
        records.len(),
        out_dir.join("trials.jsonl").display()
    );
    match (stats.success_rate, stats.ci95_low, stats.ci95_high) {
        (Some(rate), Some(lo), Some(hi)) => println!(
            "successes: {}/{} (rate {rate:.4}, 95% CI [{lo:.4}, {hi:.4}])",
            stats.successes, stats.trials
        ),
        _ => println!("successes: 0/0 (rate undefined)"),
    }
    if let Some(c) = stats.coprimality_rate {
        println!("coprimality rate: {c:.4}");
    }
    if let Some(m) = stats.mean_samples_to_stabilization {
        println!("mean samples to stabilization: {m:.2}");
    }
    let report = match cfg.report_format {
        ReportFormat::Json => out_dir.join("summary.json"),
        ReportFormat::Csv => out_dir.join("summary.csv"),
    };
    println!("summary: {}", report.display());
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<(), Error> {
    if let Some(cfg_path) = &args.config {
        let cfg = parse_config_path(cfg_path)?;
        if !log_is_complete(&args.log, &cfg)? {
            return Err(Error::config(format!(
                "partial run log: record count does not match the config's {} expected records",
                cfg.expected_records()
            )));
        }
    }
    let records = read_log(&args.log)?;
    let mut mismatches = 0usize;
    for (i, rec) in records.iter().enumerate() {
        let replayed = replay_record(rec)?;
        if !records_match(rec, &replayed) {
            mismatches += 1;
            eprintln!("record {i} does not reproduce");
        }
    }
    println!(
        "replayed {}/{} records: {}",
        records.len() - mismatches,
        records.len(),
        if mismatches == 0 {
            "all match"
        } else {
            "MISMATCH"
        }
    );
    if mismatches > 0 {
        return Err(Error::SampleOutOfRange(format!(
            "{mismatches} replayed records diverged from the log"
        )));
    }
    Ok(())
}
