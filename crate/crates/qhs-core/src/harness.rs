//! Config-driven experiment runner: parse a strict JSON config, execute a
//! reproducible trial batch, persist one record per line, and aggregate
//! summary statistics.
//!
//! Seeds: trial `i` of a batch samples with `derive_seed(master_seed, i+1)`
//! and the shared oracle is built from `derive_seed(master_seed, 0)`; the
//! dual-Shor sweep gives divisor `i` its own sub-master
//! `derive_seed(master_seed, i+1)` and applies the same scheme inside. Runs
//! with the same config and master seed therefore produce identical logs,
//! byte for byte, up to the timing field.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::algorithms::{
    derive_seed, validate_alg_circle, validate_alg_r, validate_alg_subspace,
    AlgCircleExperiment, AlgRExperiment, AlgSubspaceExperiment, RawOutcomes, Recovery,
    TrialRecord, ORACLE_STREAM,
};
use crate::{Error, Result};

/// Algorithm selector of an experiment config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    AlgR,
    AlgCircle,
    AlgSubspace,
    DualShorSweep,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AlgR => "alg-r",
            Algorithm::AlgCircle => "alg-circle",
            Algorithm::AlgSubspace => "alg-subspace",
            Algorithm::DualShorSweep => "dual-shor-sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

fn default_runs() -> u32 {
    2
}

fn default_max_samples() -> u64 {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgRParams {
    pub period: u64,
    pub samples_per_unit: u64,
    pub window: u64,
    pub q: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgCircleParams {
    pub q: u64,
    pub a: u64,
    #[serde(default = "default_runs")]
    pub runs: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgSubspaceParams {
    pub p: u64,
    pub n: u32,
    pub basis: Vec<Vec<u64>>,
    #[serde(default = "default_max_samples")]
    pub max_samples: u64,
    /// Extra rank-free samples before the span is considered stable;
    /// defaults to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<u64>,
}

impl AlgSubspaceParams {
    pub fn effective_patience(&self) -> u64 {
        self.patience.unwrap_or(self.n as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualShorSweepParams {
    pub q: u64,
    pub divisors: Vec<u64>,
    #[serde(default = "default_runs")]
    pub runs: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AlgorithmParams {
    AlgR(AlgRParams),
    AlgCircle(AlgCircleParams),
    AlgSubspace(AlgSubspaceParams),
    DualShorSweep(DualShorSweepParams),
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub trials: u64,
    pub master_seed: u64,
    pub params: AlgorithmParams,
    pub output_dir: Option<PathBuf>,
    pub report_format: ReportFormat,
}

/// On-disk shape of the config file (strict: unknown keys are rejected).
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    algorithm: Algorithm,
    trials: u64,
    master_seed: u64,
    params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    report_format: Option<ReportFormat>,
}

impl ExperimentConfig {
    /// All violated algorithm preconditions, each naming its inequality.
    pub fn violations(&self) -> Vec<String> {
        match &self.params {
            AlgorithmParams::AlgR(p) => {
                validate_alg_r(p.period, p.samples_per_unit, p.window, p.q)
            }
            AlgorithmParams::AlgCircle(p) => validate_alg_circle(p.q, p.a, p.runs),
            AlgorithmParams::AlgSubspace(p) => validate_alg_subspace(
                p.p,
                p.n,
                &p.basis,
                p.max_samples,
                p.effective_patience(),
            ),
            AlgorithmParams::DualShorSweep(p) => {
                let mut v = Vec::new();
                for &a in &p.divisors {
                    v.extend(validate_alg_circle(p.q, a, p.runs));
                }
                v
            }
        }
    }

    /// Records a full run will produce (the sweep emits one batch per
    /// divisor).
    pub fn expected_records(&self) -> u64 {
        match &self.params {
            AlgorithmParams::DualShorSweep(p) => self.trials * p.divisors.len() as u64,
            _ => self.trials,
        }
    }

    /// Serialize back to the config file format (lossless round trip).
    pub fn to_json_string(&self) -> Result<String> {
        let params = match &self.params {
            AlgorithmParams::AlgR(p) => serde_json::to_value(p)?,
            AlgorithmParams::AlgCircle(p) => serde_json::to_value(p)?,
            AlgorithmParams::AlgSubspace(p) => serde_json::to_value(p)?,
            AlgorithmParams::DualShorSweep(p) => serde_json::to_value(p)?,
        };
        let raw = RawConfig {
            algorithm: self.algorithm,
            trials: self.trials,
            master_seed: self.master_seed,
            params,
            output_dir: self.output_dir.clone(),
            report_format: Some(self.report_format),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }
}

/// Parse and validate a config from JSON text. Structural problems (unknown
/// keys, wrong types) and every violated precondition are reported together
/// as a config error.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| Error::config(format!("config schema: {e}")))?;
    let params = match raw.algorithm {
        Algorithm::AlgR => AlgorithmParams::AlgR(
            serde_json::from_value(raw.params)
                .map_err(|e| Error::config(format!("alg-r params: {e}")))?,
        ),
        Algorithm::AlgCircle => AlgorithmParams::AlgCircle(
            serde_json::from_value(raw.params)
                .map_err(|e| Error::config(format!("alg-circle params: {e}")))?,
        ),
        Algorithm::AlgSubspace => AlgorithmParams::AlgSubspace(
            serde_json::from_value(raw.params)
                .map_err(|e| Error::config(format!("alg-subspace params: {e}")))?,
        ),
        Algorithm::DualShorSweep => AlgorithmParams::DualShorSweep(
            serde_json::from_value(raw.params)
                .map_err(|e| Error::config(format!("dual-shor-sweep params: {e}")))?,
        ),
    };
    let cfg = ExperimentConfig {
        algorithm: raw.algorithm,
        trials: raw.trials,
        master_seed: raw.master_seed,
        params,
        output_dir: raw.output_dir,
        report_format: raw.report_format.unwrap_or_default(),
    };
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    Ok(cfg)
}

pub fn parse_config_path(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config_str(&text)
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn trial_err(index: u64) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Config(v) => Error::Config(v),
        other => Error::config(format!("trial {index} failed: {other}")),
    }
}

/// Execute every trial of a validated config, writing one JSON record per
/// line to `trials.jsonl` under `out_dir` as trials complete (the log is
/// append-only; a crash leaves a detectable partial log). Shared oracles are
/// dumped as JSON for audit. Returns the records and the aggregate stats.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(Vec<TrialRecord>, SummaryStats)> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let cfg_path = out_dir.join("config.json");
    fs::write(&cfg_path, cfg.to_json_string()?).map_err(io_err(&cfg_path))?;

    let log_path = out_dir.join("trials.jsonl");
    let file = fs::File::create(&log_path).map_err(io_err(&log_path))?;
    let mut log = BufWriter::new(file);
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut emit = |rec: TrialRecord, log: &mut BufWriter<fs::File>| -> Result<()> {
        let line = serde_json::to_string(&rec)?;
        writeln!(log, "{line}").map_err(io_err(&log_path))?;
        records.push(rec);
        Ok(())
    };

    let master = cfg.master_seed;
    match &cfg.params {
        AlgorithmParams::AlgR(p) => {
            let exp = AlgRExperiment::new(
                p.period,
                p.samples_per_unit,
                p.window,
                p.q,
                derive_seed(master, ORACLE_STREAM),
            )?;
            write_oracle(out_dir, "oracle.json", exp.oracle())?;
            for i in 0..cfg.trials {
                let rec = exp
                    .run_trial(derive_seed(master, i + 1))
                    .map_err(trial_err(i))?;
                emit(rec, &mut log)?;
            }
        }
        AlgorithmParams::AlgCircle(p) => {
            let exp =
                AlgCircleExperiment::new(p.q, p.a, p.runs, derive_seed(master, ORACLE_STREAM))?;
            write_oracle(out_dir, "oracle.json", exp.oracle())?;
            for i in 0..cfg.trials {
                emit(exp.run_trial(derive_seed(master, i + 1)), &mut log)?;
            }
        }
        AlgorithmParams::AlgSubspace(p) => {
            let exp = AlgSubspaceExperiment::new(
                p.p,
                p.n,
                &p.basis,
                p.max_samples,
                p.effective_patience(),
                derive_seed(master, ORACLE_STREAM),
            )?;
            write_oracle(out_dir, "oracle.json", exp.oracle())?;
            for i in 0..cfg.trials {
                let rec = exp
                    .run_trial(derive_seed(master, i + 1))
                    .map_err(trial_err(i))?;
                emit(rec, &mut log)?;
            }
        }
        AlgorithmParams::DualShorSweep(p) => {
            for (di, &a) in p.divisors.iter().enumerate() {
                let sub_master = derive_seed(master, di as u64 + 1);
                let exp = AlgCircleExperiment::new(
                    p.q,
                    a,
                    p.runs,
                    derive_seed(sub_master, ORACLE_STREAM),
                )?;
                write_oracle(out_dir, &format!("oracle-a{a}.json"), exp.oracle())?;
                for t in 0..cfg.trials {
                    emit(exp.run_trial(derive_seed(sub_master, t + 1)), &mut log)?;
                }
            }
        }
    }
    log.flush().map_err(io_err(&log_path))?;

    let stats = aggregate(&records);
    emit_report(&records, cfg.report_format, out_dir)?;
    Ok((records, stats))
}

fn write_oracle(out_dir: &Path, name: &str, oracle: &crate::oracle::OracleInstance) -> Result<()> {
    let path = out_dir.join(name);
    fs::write(&path, oracle.to_json()?).map_err(io_err(&path))
}

/// Read a run log back into records.
pub fn read_log(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// A run log is complete when its record count matches what the config
/// promises.
pub fn log_is_complete(path: &Path, cfg: &ExperimentConfig) -> Result<bool> {
    Ok(read_log(path)?.len() as u64 == cfg.expected_records())
}

/// Record line with the timing field zeroed: the determinism-comparable form.
pub fn normalized_record_line(rec: &TrialRecord) -> Result<String> {
    let mut rec = rec.clone();
    rec.elapsed_micros = 0;
    Ok(serde_json::to_string(&rec)?)
}

// ---------------------------------------------------------------------------
// Aggregation and reports
// ---------------------------------------------------------------------------

/// Aggregate statistics of one experiment. All rates derive from integer
/// accumulators, so aggregation is exactly order-independent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub trials: u64,
    pub successes: u64,
    /// `None` when there are no trials.
    pub success_rate: Option<f64>,
    /// 95% Wilson score interval for the success rate.
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
    pub retry_count: u64,
    /// One mass per trial, keyed by the trial's primary outcome: the binned
    /// eigenvalue `m/q` (alg-r), the first sampled index (alg-circle), or
    /// the first sampled vector (alg-subspace).
    pub outcome_histogram: BTreeMap<String, u64>,
    /// Mean 1-based index of the last rank-raising sample (subspace trials
    /// only).
    pub mean_samples_to_stabilization: Option<f64>,
    /// Fraction of circle trials whose gcd fold hit the hidden step exactly,
    /// i.e. whose sampled multipliers were coprime.
    pub coprimality_rate: Option<f64>,
}

fn wilson_ci(successes: u64, trials: u64) -> (f64, f64) {
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn histogram_key(rec: &TrialRecord) -> String {
    match &rec.outcomes {
        RawOutcomes::Grid { m, q, .. } => format!("{m}/{q}"),
        RawOutcomes::Frequencies { indices } => indices
            .first()
            .map(|j| j.to_string())
            .unwrap_or_else(|| "-".into()),
        RawOutcomes::Vectors { samples, .. } => samples
            .first()
            .map(|v| {
                v.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(":")
            })
            .unwrap_or_else(|| "-".into()),
    }
}

/// Order-independent aggregation of trial records.
pub fn aggregate(records: &[TrialRecord]) -> SummaryStats {
    let trials = records.len() as u64;
    let successes = records.iter().filter(|r| r.success).count() as u64;
    let retry_count = records.iter().filter(|r| r.retry_suggested).count() as u64;

    let mut outcome_histogram = BTreeMap::new();
    let mut stabilization_sum = 0u64;
    let mut subspace_trials = 0u64;
    let mut circle_trials = 0u64;
    let mut circle_hits = 0u64;
    for rec in records {
        *outcome_histogram.entry(histogram_key(rec)).or_insert(0) += 1;
        match &rec.outcomes {
            RawOutcomes::Vectors { stabilized_at, .. } => {
                stabilization_sum += stabilized_at;
                subspace_trials += 1;
            }
            RawOutcomes::Frequencies { .. } => {
                circle_trials += 1;
                if rec.success {
                    circle_hits += 1;
                }
            }
            RawOutcomes::Grid { .. } => {}
        }
    }

    let (success_rate, ci95_low, ci95_high) = if trials == 0 {
        (None, None, None)
    } else {
        let (lo, hi) = wilson_ci(successes, trials);
        (
            Some(successes as f64 / trials as f64),
            Some(lo),
            Some(hi),
        )
    };

    SummaryStats {
        trials,
        successes,
        success_rate,
        ci95_low,
        ci95_high,
        retry_count,
        outcome_histogram,
        mean_samples_to_stabilization: (subspace_trials > 0)
            .then(|| stabilization_sum as f64 / subspace_trials as f64),
        coprimality_rate: (circle_trials > 0)
            .then(|| circle_hits as f64 / circle_trials as f64),
    }
}

fn recovered_cell(rec: &TrialRecord) -> String {
    match &rec.recovery {
        Recovery::Fraction { value } => value
            .as_ref()
            .map(|r| r.to_string())
            .unwrap_or_else(|| "-".into()),
        Recovery::Step { value } => value.to_string(),
        Recovery::Subspace { basis } => basis
            .as_ref()
            .map(|rows| {
                if rows.is_empty() {
                    "0".into()
                } else {
                    rows.iter()
                        .map(|v| {
                            v.iter()
                                .map(|c| c.to_string())
                                .collect::<Vec<_>>()
                                .join(":")
                        })
                        .collect::<Vec<_>>()
                        .join("|")
                }
            })
            .unwrap_or_else(|| "-".into()),
    }
}

fn outcomes_cell(rec: &TrialRecord) -> String {
    match &rec.outcomes {
        RawOutcomes::Frequencies { indices } => indices
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(";"),
        RawOutcomes::Grid { index, m, q } => format!("j={index};m={m};q={q}"),
        RawOutcomes::Vectors { samples, .. } => samples
            .iter()
            .map(|v| {
                v.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(":")
            })
            .collect::<Vec<_>>()
            .join(";"),
    }
}

/// Write the summary report: `summary.json` holds the aggregate stats,
/// `summary.csv` a flat per-trial table with the documented header
/// `algorithm,trial,seed,oracle_seed,outcomes,recovered,success,retry`.
/// Both are deterministic given the record order.
pub fn emit_report(records: &[TrialRecord], format: ReportFormat, out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    match format {
        ReportFormat::Json => {
            let path = out_dir.join("summary.json");
            let stats = aggregate(records);
            let mut text = serde_json::to_string_pretty(&stats)?;
            text.push('\n');
            fs::write(&path, text).map_err(io_err(&path))?;
            Ok(path)
        }
        ReportFormat::Csv => {
            let path = out_dir.join("summary.csv");
            let mut out = String::from(
                "algorithm,trial,seed,oracle_seed,outcomes,recovered,success,retry\n",
            );
            for (i, rec) in records.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    rec.config.algorithm_name(),
                    i,
                    rec.seed,
                    rec.config.oracle_seed(),
                    outcomes_cell(rec),
                    recovered_cell(rec),
                    rec.success,
                    rec.retry_suggested,
                ));
            }
            fs::write(&path, out).map_err(io_err(&path))?;
            Ok(path)
        }
    }
}
