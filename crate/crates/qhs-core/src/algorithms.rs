//! End-to-end pipelines: oracle → simulator → postprocess, one auditable
//! trial record per run.
//!
//! Every trial is reproducible from its record alone: the config snapshot
//! carries the oracle seed, the `seed` field carries the sampling seed, and
//! [`replay_record`] re-executes the trial from those. Experiments share one
//! oracle and one spectral distribution across their trials (the outcome
//! distribution does not depend on the random labels — a tested invariance),
//! which keeps large batches cheap without touching per-trial determinism.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::groups::Rational;
use crate::oracle::{make_periodic_grid_oracle, make_periodic_oracle, make_subspace_oracle, OracleInstance};
use crate::postprocess::{
    gcd_recover, max_denominator_bound, recover_rational, recover_subspace, SubspaceBasis,
};
use crate::simulator::{bin_frequency, left_marginal, measure, SpectralDistribution};
use crate::{Error, Result};

/// Stream index reserved for oracle construction; trial `i` samples with
/// stream `i + 1`.
pub const ORACLE_STREAM: u64 = 0;

/// Derive an independent 64-bit seed from a master seed and a stream index.
///
/// The documented pure function behind every batch: a SplitMix64 scramble of
/// `master XOR (stream * golden gamma)`. Serial and parallel execution of a
/// batch therefore produce identical logs.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = master ^ stream.wrapping_mul(GAMMA);
    z = z.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The deterministic RNG used everywhere in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Trial records
// ---------------------------------------------------------------------------

/// Config snapshot of one trial; the `algorithm` tag discriminates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum TrialConfig {
    AlgR {
        period: u64,
        samples_per_unit: u64,
        window: u64,
        q: u64,
        oracle_seed: u64,
    },
    AlgCircle {
        q: u64,
        a: u64,
        runs: u32,
        oracle_seed: u64,
    },
    AlgSubspace {
        p: u64,
        n: u32,
        basis: Vec<Vec<u64>>,
        max_samples: u64,
        patience: u64,
        oracle_seed: u64,
    },
}

impl TrialConfig {
    pub fn algorithm_name(&self) -> &'static str {
        match self {
            TrialConfig::AlgR { .. } => "alg-r",
            TrialConfig::AlgCircle { .. } => "alg-circle",
            TrialConfig::AlgSubspace { .. } => "alg-subspace",
        }
    }

    pub fn oracle_seed(&self) -> u64 {
        match *self {
            TrialConfig::AlgR { oracle_seed, .. }
            | TrialConfig::AlgCircle { oracle_seed, .. }
            | TrialConfig::AlgSubspace { oracle_seed, .. } => oracle_seed,
        }
    }
}

/// Raw measurement outcomes of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RawOutcomes {
    /// Sampled frequency indices (circle pipeline).
    Frequencies { indices: Vec<u64> },
    /// One sampled grid frequency and its binned eigenvalue `m/q`.
    Grid { index: u64, m: u64, q: u64 },
    /// Sampled vectors fed to the streaming recovery, plus the 1-based index
    /// of the last rank-raising sample (0 if none).
    Vectors {
        samples: Vec<Vec<u64>>,
        stabilized_at: u64,
    },
}

/// Classical recovery result of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Recovery {
    /// Continued-fraction reconstruction of a frequency (alg-r).
    Fraction { value: Option<Rational> },
    /// Euclidean gcd of the sampled eigenvalues (alg-circle).
    Step { value: u64 },
    /// Candidate hidden subspace in canonical echelon rows (alg-subspace).
    Subspace { basis: Option<Vec<Vec<u64>>> },
}

/// One end-to-end run. `config` + `seed` fully determine a replay;
/// `elapsed_micros` is the only field excluded from determinism guarantees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub config: TrialConfig,
    pub seed: u64,
    pub outcomes: RawOutcomes,
    pub recovery: Recovery,
    pub success: bool,
    pub retry_suggested: bool,
    pub elapsed_micros: u64,
}

/// Compare two records ignoring timing.
pub fn records_match(a: &TrialRecord, b: &TrialRecord) -> bool {
    let mut a = a.clone();
    let mut b = b.clone();
    a.elapsed_micros = 0;
    b.elapsed_micros = 0;
    a == b
}

// ---------------------------------------------------------------------------
// Config validation (named-inequality errors)
// ---------------------------------------------------------------------------

/// All violated preconditions of an alg-r config, each naming its
/// inequality.
pub fn validate_alg_r(period: u64, samples_per_unit: u64, window: u64, q: u64) -> Vec<String> {
    let mut v = Vec::new();
    if period == 0 {
        v.push("P >= 1 violated".into());
    }
    if samples_per_unit == 0 {
        v.push("R >= 1 violated".into());
    }
    if window == 0 {
        v.push("T >= 1 violated".into());
    }
    if period != 0 && window != 0 && window % period != 0 {
        v.push(format!("P | T violated (P={period}, T={window})"));
    }
    if (q as u128) < 2 * period as u128 * period as u128 {
        v.push(format!("Q >= 2*P^2 violated (Q={q}, P={period})"));
    }
    if window.checked_mul(samples_per_unit).is_none() {
        v.push(format!(
            "M = T*R overflows (T={window}, R={samples_per_unit})"
        ));
    }
    v
}

/// All violated preconditions of an alg-circle config.
pub fn validate_alg_circle(q: u64, a: u64, runs: u32) -> Vec<String> {
    let mut v = Vec::new();
    if q == 0 {
        v.push("Q >= 1 violated".into());
    }
    if a == 0 {
        v.push("a >= 1 violated".into());
    } else if q != 0 && q % a != 0 {
        v.push(format!("a | Q violated (a={a}, Q={q})"));
    }
    if runs < 2 {
        v.push(format!("runs >= 2 violated (runs={runs})"));
    }
    v
}

/// All violated preconditions of an alg-subspace config.
pub fn validate_alg_subspace(
    p: u64,
    n: u32,
    basis: &[Vec<u64>],
    max_samples: u64,
    patience: u64,
) -> Vec<String> {
    let mut v = Vec::new();
    if !crate::groups::is_prime(p) {
        v.push(format!("p prime violated (p={p})"));
    }
    if n == 0 {
        v.push("n >= 1 violated".into());
    }
    if max_samples == 0 {
        v.push("max_samples >= 1 violated".into());
    }
    if patience == 0 {
        v.push("patience >= 1 violated".into());
    }
    if crate::groups::is_prime(p) && n >= 1 {
        if let Err(e) = SubspaceBasis::from_independent(p, n, basis) {
            v.push(e.to_string());
        }
    }
    v
}

fn config_result(violations: Vec<String>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(violations))
    }
}

// ---------------------------------------------------------------------------
// Experiments (shared oracle + distribution, many trials)
// ---------------------------------------------------------------------------

/// Prepared alg-r experiment: grid oracle of sample period `P*R` on
/// `Z_{T*R}` with its exact spectral distribution.
pub struct AlgRExperiment {
    period: u64,
    samples_per_unit: u64,
    window: u64,
    q: u64,
    oracle_seed: u64,
    oracle: OracleInstance,
    dist: SpectralDistribution,
}

impl AlgRExperiment {
    pub fn new(
        period: u64,
        samples_per_unit: u64,
        window: u64,
        q: u64,
        oracle_seed: u64,
    ) -> Result<Self> {
        config_result(validate_alg_r(period, samples_per_unit, window, q))?;
        let m = window * samples_per_unit;
        let d = period * samples_per_unit;
        let mut rng = rng_from_seed(oracle_seed);
        let oracle = make_periodic_grid_oracle(m, samples_per_unit, d, true, &mut rng)?;
        let dist = left_marginal(&oracle);
        Ok(AlgRExperiment {
            period,
            samples_per_unit,
            window,
            q,
            oracle_seed,
            oracle,
            dist,
        })
    }

    pub fn oracle(&self) -> &OracleInstance {
        &self.oracle
    }

    pub fn distribution(&self) -> &SpectralDistribution {
        &self.dist
    }

    /// Measure once, bin by `Q`, recover by continued fractions with bound
    /// `⌊sqrt(Q/2)⌋`; success iff the recovered denominator is the hidden
    /// period `P` (any unit numerator counts — the goal is the period).
    pub fn run_trial(&self, sample_seed: u64) -> Result<TrialRecord> {
        let start = Instant::now();
        let mut rng = rng_from_seed(sample_seed);
        let index = measure(&self.dist, &mut rng);
        let binned = bin_frequency(index, self.oracle.domain(), self.q)?;
        let recovered = recover_rational(&binned, max_denominator_bound(self.q));
        let success = recovered.as_ref().is_some_and(|r| {
            r.denominator_u64()
                .and_then(|den| den.checked_mul(self.samples_per_unit))
                .is_some_and(|d| self.oracle.confirm_period(d))
        });
        Ok(TrialRecord {
            config: TrialConfig::AlgR {
                period: self.period,
                samples_per_unit: self.samples_per_unit,
                window: self.window,
                q: self.q,
                oracle_seed: self.oracle_seed,
            },
            seed: sample_seed,
            outcomes: RawOutcomes::Grid {
                index,
                m: binned.m,
                q: binned.q,
            },
            recovery: Recovery::Fraction { value: recovered },
            success,
            retry_suggested: false,
            elapsed_micros: start.elapsed().as_micros() as u64,
        })
    }
}

/// Prepared circle (`Z_Q`) experiment: oracle of sample period `d = Q/a`,
/// whose spectrum is supported on the multiples of `a`.
pub struct AlgCircleExperiment {
    q: u64,
    a: u64,
    runs: u32,
    oracle_seed: u64,
    oracle: OracleInstance,
    dist: SpectralDistribution,
}

impl AlgCircleExperiment {
    pub fn new(q: u64, a: u64, runs: u32, oracle_seed: u64) -> Result<Self> {
        config_result(validate_alg_circle(q, a, runs))?;
        let d = q / a;
        let mut rng = rng_from_seed(oracle_seed);
        let oracle = make_periodic_oracle(q, d, true, &mut rng)?;
        let dist = left_marginal(&oracle);
        Ok(AlgCircleExperiment {
            q,
            a,
            runs,
            oracle_seed,
            oracle,
            dist,
        })
    }

    pub fn oracle(&self) -> &OracleInstance {
        &self.oracle
    }

    pub fn distribution(&self) -> &SpectralDistribution {
        &self.dist
    }

    /// Sample `runs` eigenvalues (all multiples of `a`), fold with the
    /// Euclidean gcd; success iff the fold returns exactly `a`. An all-zero
    /// fold yields 0, recorded as a failure with the retry flag set.
    pub fn run_trial(&self, sample_seed: u64) -> TrialRecord {
        let start = Instant::now();
        let mut rng = rng_from_seed(sample_seed);
        let indices: Vec<u64> = (0..self.runs)
            .map(|_| measure(&self.dist, &mut rng))
            .collect();
        let value = gcd_recover(&indices);
        let retry_suggested = value == 0;
        let success = value != 0 && self.oracle.confirm_step(value);
        TrialRecord {
            config: TrialConfig::AlgCircle {
                q: self.q,
                a: self.a,
                runs: self.runs,
                oracle_seed: self.oracle_seed,
            },
            seed: sample_seed,
            outcomes: RawOutcomes::Frequencies { indices },
            recovery: Recovery::Step { value },
            success,
            retry_suggested,
            elapsed_micros: start.elapsed().as_micros() as u64,
        }
    }
}

/// Prepared hidden-subspace experiment on `Z_p^n`: the spectrum is uniform
/// on the orthogonal complement of `V`, and trials accumulate samples until
/// the span stabilizes.
pub struct AlgSubspaceExperiment {
    p: u64,
    n: u32,
    basis: SubspaceBasis,
    max_samples: u64,
    patience: u64,
    oracle_seed: u64,
    oracle: OracleInstance,
    dist: SpectralDistribution,
}

impl AlgSubspaceExperiment {
    pub fn new(
        p: u64,
        n: u32,
        basis: &[Vec<u64>],
        max_samples: u64,
        patience: u64,
        oracle_seed: u64,
    ) -> Result<Self> {
        config_result(validate_alg_subspace(p, n, basis, max_samples, patience))?;
        let canonical = SubspaceBasis::from_independent(p, n, basis)?;
        let mut rng = rng_from_seed(oracle_seed);
        let oracle = make_subspace_oracle(p, n, basis, &mut rng)?;
        let dist = left_marginal(&oracle);
        Ok(AlgSubspaceExperiment {
            p,
            n,
            basis: canonical,
            max_samples,
            patience,
            oracle_seed,
            oracle,
            dist,
        })
    }

    pub fn oracle(&self) -> &OracleInstance {
        &self.oracle
    }

    pub fn distribution(&self) -> &SpectralDistribution {
        &self.dist
    }

    pub fn run_trial(&self, sample_seed: u64) -> Result<TrialRecord> {
        let start = Instant::now();
        let mut rng = rng_from_seed(sample_seed);
        let domain = self.oracle.domain();
        // The trial draws its full budget up front; the record keeps the
        // consumed prefix, so a replay with the same seed reproduces it.
        let drawn: Vec<Vec<u64>> = (0..self.max_samples)
            .map(|_| {
                domain
                    .element(measure(&self.dist, &mut rng))
                    .coords()
                    .to_vec()
            })
            .collect();
        let recovery = recover_subspace(
            self.p,
            self.n,
            drawn.iter().cloned(),
            self.max_samples,
            self.patience,
        )?;
        let success = recovery
            .basis
            .as_ref()
            .is_some_and(|b| self.oracle.confirm_subspace(b));
        Ok(TrialRecord {
            config: TrialConfig::AlgSubspace {
                p: self.p,
                n: self.n,
                basis: self.basis.vectors().to_vec(),
                max_samples: self.max_samples,
                patience: self.patience,
                oracle_seed: self.oracle_seed,
            },
            seed: sample_seed,
            outcomes: RawOutcomes::Vectors {
                samples: drawn[..recovery.samples_consumed as usize].to_vec(),
                stabilized_at: recovery.stabilized_at,
            },
            recovery: Recovery::Subspace {
                basis: recovery.basis.map(|b| b.vectors().to_vec()),
            },
            success,
            retry_suggested: false,
            elapsed_micros: start.elapsed().as_micros() as u64,
        })
    }
}

// ---------------------------------------------------------------------------
// Spec-level single-trial entry points
// ---------------------------------------------------------------------------

/// One alg-r trial: oracle from stream 0 of `seed`, sampling from stream 1.
pub fn run_alg_r(
    period: u64,
    samples_per_unit: u64,
    window: u64,
    q: u64,
    seed: u64,
) -> Result<TrialRecord> {
    let exp = AlgRExperiment::new(
        period,
        samples_per_unit,
        window,
        q,
        derive_seed(seed, ORACLE_STREAM),
    )?;
    exp.run_trial(derive_seed(seed, 1))
}

/// One circle trial on `Z_Q` with hidden step `a` and `runs >= 2` samples.
pub fn run_alg_circle(q: u64, a: u64, runs: u32, seed: u64) -> Result<TrialRecord> {
    let exp = AlgCircleExperiment::new(q, a, runs, derive_seed(seed, ORACLE_STREAM))?;
    Ok(exp.run_trial(derive_seed(seed, 1)))
}

/// One hidden-subspace trial with the default patience `n`.
pub fn run_alg_subspace(
    p: u64,
    n: u32,
    basis: &[Vec<u64>],
    max_samples: u64,
    seed: u64,
) -> Result<TrialRecord> {
    run_alg_subspace_with_patience(p, n, basis, max_samples, n as u64, seed)
}

pub fn run_alg_subspace_with_patience(
    p: u64,
    n: u32,
    basis: &[Vec<u64>],
    max_samples: u64,
    patience: u64,
    seed: u64,
) -> Result<TrialRecord> {
    let exp = AlgSubspaceExperiment::new(
        p,
        n,
        basis,
        max_samples,
        patience,
        derive_seed(seed, ORACLE_STREAM),
    )?;
    exp.run_trial(derive_seed(seed, 1))
}

/// Batch of circle trials across a divisor set: `trials_per` trials for each
/// `a`, each divisor running as its own derived-seed experiment.
pub fn run_dual_shor_sweep(
    q: u64,
    divisors: &[u64],
    trials_per: u64,
    runs: u32,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let mut violations = Vec::new();
    for &a in divisors {
        violations.extend(validate_alg_circle(q, a, runs));
    }
    config_result(violations)?;
    let mut records = Vec::with_capacity(divisors.len() * trials_per as usize);
    for (i, &a) in divisors.iter().enumerate() {
        let sub_master = derive_seed(seed, i as u64 + 1);
        let exp = AlgCircleExperiment::new(q, a, runs, derive_seed(sub_master, ORACLE_STREAM))?;
        for t in 0..trials_per {
            records.push(exp.run_trial(derive_seed(sub_master, t + 1)));
        }
    }
    Ok(records)
}

/// Re-execute a persisted record from its config snapshot and seed.
pub fn replay_record(record: &TrialRecord) -> Result<TrialRecord> {
    match &record.config {
        TrialConfig::AlgR {
            period,
            samples_per_unit,
            window,
            q,
            oracle_seed,
        } => AlgRExperiment::new(*period, *samples_per_unit, *window, *q, *oracle_seed)?
            .run_trial(record.seed),
        TrialConfig::AlgCircle {
            q,
            a,
            runs,
            oracle_seed,
        } => Ok(AlgCircleExperiment::new(*q, *a, *runs, *oracle_seed)?.run_trial(record.seed)),
        TrialConfig::AlgSubspace {
            p,
            n,
            basis,
            max_samples,
            patience,
            oracle_seed,
        } => AlgSubspaceExperiment::new(*p, *n, basis, *max_samples, *patience, *oracle_seed)?
            .run_trial(record.seed),
    }
}
