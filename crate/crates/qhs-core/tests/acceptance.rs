//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test -p qhs-core --test acceptance -- --nocapture` to see
//! them). Every tolerance is pinned in code; nothing is deferred to later
//! calibration.

use std::path::Path;
use std::time::Instant;

use qhs_core::algorithms::{run_alg_r, AlgSubspaceExperiment, RawOutcomes, Recovery};
use qhs_core::groups::{gcd, DomainSpec, Rational};
use qhs_core::harness::{
    aggregate, normalized_record_line, parse_config_str, read_log, run_experiment,
};
use qhs_core::oracle::make_periodic_oracle;
use qhs_core::postprocess::{recover_rational, SubspaceBasis};
use qhs_core::simulator::{full_state_evolve, left_marginal, BinnedOutcome};
use qhs_core::spectral::{dft, dft_direct, AmplitudeVector, Direction};
use qhs_core::tolerances::AMP_EPSILON;

fn criterion(name: &str, passed: bool, elapsed: f64, detail: String) {
    println!(
        "[acceptance] {name}: {} ({elapsed:.1}s)",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "{name}: {detail}");
}

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Criterion 1: two-run gcd success on Z_4096 with a=16 reproduces the
/// coprimality constant 1/ζ(2) ≈ 0.6079 — empirical rate within ±0.01 of the
/// exact finite-Q probability (exhaustive over all 256² multiplier pairs),
/// and that exact value within ±0.03 of 0.6079.
#[test]
fn c1_zeta2_reproduction() {
    let start = Instant::now();
    let (q, a, trials) = (4096u64, 16u64, 20_000u64);
    let ell_range = q / a; // multipliers uniform on [0, 256)

    let mut hits = 0u64;
    for l1 in 0..ell_range {
        for l2 in 0..ell_range {
            if gcd(l1, l2) == 1 {
                hits += 1;
            }
        }
    }
    let exact = hits as f64 / (ell_range * ell_range) as f64;

    let cfg = parse_config_str(&format!(
        r#"{{"algorithm":"alg-circle","trials":{trials},"master_seed":42,
            "params":{{"q":{q},"a":{a},"runs":2}}}}"#
    ))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (_, stats) = run_experiment(&cfg, dir.path()).unwrap();
    let empirical = stats.success_rate.unwrap();

    let elapsed = start.elapsed().as_secs_f64();
    let ok_exact = (exact - 0.6079).abs() <= 0.03;
    let ok_emp = (empirical - exact).abs() <= 0.01;
    let ok_time = elapsed < 60.0;
    criterion(
        "1 zeta2-reproduction",
        ok_exact && ok_emp && ok_time,
        elapsed,
        format!(
            "exact finite-Q probability {exact:.4} (target 0.6079 ± 0.03), \
             empirical {empirical:.4} (target exact ± 0.01), runtime {elapsed:.1}s (< 60s)"
        ),
    );
}

/// Criterion 2: for every P in [2,100] and every unit n mod P with Q = 2P²,
/// binning the exact frequency n/P and recovering through continued
/// fractions returns n/P exactly. Zero failures allowed.
#[test]
fn c2_continued_fraction_guarantee() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut cases = 0u64;
    for p in 2..=100u64 {
        let q = 2 * p * p;
        for n in (1..p).filter(|&n| gcd(n, p) == 1) {
            cases += 1;
            let m = q * n / p; // ⌊Q·n/P⌋ exactly
            let got = recover_rational(&BinnedOutcome { m, q }, p);
            let want = Rational::new(n, p).unwrap();
            if got.as_ref() != Some(&want) {
                failures.push(format!("P={p}, n={n}: got {got:?}"));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        "2 continued-fraction-guarantee",
        failures.is_empty() && elapsed < 10.0,
        elapsed,
        format!(
            "{} failures out of {cases} cases; first: {:?}",
            failures.len(),
            failures.first()
        ),
    );
}

/// Criterion 3: for every M ≤ 64 and every divisor d | M with an
/// injective-on-period oracle, the measurement distribution is exactly
/// uniform 1/d on the multiples of M/d and below 1e-12 elsewhere, and the
/// grouped marginal agrees with the literal bipartite evolution.
#[test]
fn c3_spectral_comb_law() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for m in 1..=64u64 {
        for d in (1..=m).filter(|d| m % d == 0) {
            let oracle = make_periodic_oracle(m, d, true, &mut rng(m * 389 + d)).unwrap();
            let dist = left_marginal(&oracle);
            let comb = m / d;
            for (j, &p) in dist.probabilities().iter().enumerate() {
                let expected = if j as u64 % comb == 0 { 1.0 / d as f64 } else { 0.0 };
                if (p - expected).abs() >= AMP_EPSILON {
                    failures.push(format!("M={m}, d={d}, j={j}: prob {p}"));
                }
            }
            let literal = full_state_evolve(&oracle).unwrap().left_marginal_probs();
            for (j, (&a, &b)) in dist.probabilities().iter().zip(&literal).enumerate() {
                if (a - b).abs() >= AMP_EPSILON {
                    failures.push(format!("M={m}, d={d}, j={j}: marginal {a} vs literal {b}"));
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        "3 spectral-comb-law",
        failures.is_empty() && elapsed < 30.0,
        elapsed,
        format!("{} deviations; first: {:?}", failures.len(), failures.first()),
    );
}

/// Criterion 4: single-measurement period finding on the grid — for P in
/// [2,30] with R=1, T=21P, Q=2P², every trial over 100 seeds recovers a
/// fraction with denominator exactly P.
///
/// As built, the measured harmonic t is uniform over [0, P) (the comb is
/// exactly uniform — criterion 3), and a harmonic with g = gcd(t, P) > 1
/// reduces to denominator P/g, so single-sample success has probability
/// φ(P)/P < 1; recovery itself is exact every time (the recovered fraction
/// always equals the measured frequency — covered by the unit suites). The
/// all-trials assertion is kept as stated and reports honestly.
#[test]
fn c4_alg_r_success_determinism() {
    let start = Instant::now();
    let mut failures = 0u64;
    let mut trials = 0u64;
    let mut first_failure = None;
    for p in 2..=30u64 {
        let (r, t, q) = (1u64, 21 * p, 2 * p * p);
        for seed in 0..100u64 {
            trials += 1;
            let rec = run_alg_r(p, r, t, q, seed).unwrap();
            if !rec.success {
                failures += 1;
                if first_failure.is_none() {
                    let RawOutcomes::Grid { index, m, q } = rec.outcomes else {
                        unreachable!()
                    };
                    let recovered = match rec.recovery {
                        Recovery::Fraction { value } => {
                            value.map(|r| r.to_string()).unwrap_or_else(|| "-".into())
                        }
                        _ => unreachable!(),
                    };
                    first_failure = Some(format!(
                        "P={p}, seed={seed}: measured j={index} (harmonic {}/{p}), \
                         binned {m}/{q}, recovered {recovered}",
                        index / 21
                    ));
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        "4 alg-r-success-determinism",
        failures == 0 && elapsed < 60.0,
        elapsed,
        format!(
            "{failures}/{trials} trials missed denominator P \
             (measured harmonics t with gcd(t, P) > 1 reduce to denominator P/gcd; \
             observed success rate {:.3} matches the mean of φ(P)/P); first failure: {}",
            (trials - failures) as f64 / trials as f64,
            first_failure.unwrap_or_default()
        ),
    );
}

fn all_subspaces_mod2(n: u32) -> Vec<SubspaceBasis> {
    let size = 1u64 << n;
    let mut found: Vec<SubspaceBasis> = Vec::new();
    let mut stack: Vec<Vec<Vec<u64>>> = vec![vec![]];
    while let Some(tuple) = stack.pop() {
        let basis = SubspaceBasis::from_vectors(2, n, &tuple).unwrap();
        if !found.contains(&basis) {
            found.push(basis);
        }
        if tuple.len() < n as usize {
            for v in 1..size {
                let coords: Vec<u64> = (0..n as u64).map(|i| (v >> i) & 1).collect();
                let mut next = tuple.clone();
                next.push(coords);
                stack.push(next);
            }
        }
    }
    found
}

/// Criterion 5: exhaustively over all subspaces V of Z_2^n for n ≤ 4, the
/// exact sampler distribution is uniform on V⊥ (TV distance < 1e-12),
/// recovery returns V exactly in all 100 seeded trials per subspace, and the
/// mean sample index at which the span stabilizes stays within
/// dim(V⊥) + n + 1.
#[test]
fn c5_hidden_subspace_recovery() {
    let start = Instant::now();
    let mut failures = Vec::new();
    // Generous patience: the span must truly stabilize, and the stabilization
    // index (not the confirmation tail) is what the mean bound constrains.
    let (max_samples, patience) = (256u64, 32u64);
    for n in 1..=4u32 {
        let subspaces = all_subspaces_mod2(n);
        let expected_count = [2usize, 5, 16, 67][(n - 1) as usize];
        if subspaces.len() != expected_count {
            failures.push(format!(
                "n={n}: enumerated {} subspaces, expected {expected_count}",
                subspaces.len()
            ));
            continue;
        }
        let domain = DomainSpec::product(2, n).unwrap();
        for (si, v) in subspaces.iter().enumerate() {
            let master = (n as u64) << 32 | si as u64;
            let exp = AlgSubspaceExperiment::new(
                2,
                n,
                v.vectors(),
                max_samples,
                patience,
                qhs_core::algorithms::derive_seed(master, 0),
            )
            .unwrap();

            // Exact sampler law.
            let comp = v.orthogonal_complement();
            let uniform = 1.0 / (1u64 << comp.dim()) as f64;
            let mut tv = 0.0;
            for j in 0..domain.size() {
                let member = comp.contains(domain.element(j).coords()).unwrap();
                let p = exp.distribution().probabilities()[j as usize];
                tv += 0.5 * (p - if member { uniform } else { 0.0 }).abs();
            }
            if tv >= AMP_EPSILON {
                failures.push(format!("n={n}, subspace {si}: sampler TV {tv}"));
            }

            // Recovery in every seeded trial, and the stabilization bound.
            let mut stabilization_sum = 0u64;
            for trial in 0..100u64 {
                let rec = exp
                    .run_trial(qhs_core::algorithms::derive_seed(master, trial + 1))
                    .unwrap();
                let RawOutcomes::Vectors { stabilized_at, .. } = rec.outcomes else {
                    unreachable!()
                };
                stabilization_sum += stabilized_at;
                if !rec.success {
                    failures.push(format!("n={n}, subspace {si}, trial {trial}: recovery missed"));
                }
            }
            let mean = stabilization_sum as f64 / 100.0;
            let bound = (comp.dim() + n as usize + 1) as f64;
            if mean > bound {
                failures.push(format!(
                    "n={n}, subspace {si}: mean stabilization {mean:.2} > {bound}"
                ));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        "5 hidden-subspace-recovery",
        failures.is_empty() && elapsed < 120.0,
        elapsed,
        format!("{} failures; first: {:?}", failures.len(), failures.first()),
    );
}

/// Criterion 6: transform hygiene — unitarity and inverse-identity within
/// 1e-12 for random vectors at prime, power-of-two and composite sizes up to
/// 4096, and fast-path ≡ direct-summation agreement for M ≤ 512.
#[test]
fn c6_numerical_hygiene() {
    use rand::Rng;
    let start = Instant::now();
    let mut failures = Vec::new();

    let random_vector = |m: u64, seed: u64| {
        let mut r = rng(seed);
        let entries = (0..m)
            .map(|_| {
                num_complex::Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
            })
            .collect();
        AmplitudeVector::from_entries(DomainSpec::cyclic(m).unwrap(), entries).unwrap()
    };

    // Primes, powers of two, and composites up to 4096.
    for m in [2u64, 17, 64, 120, 729, 1009, 2048, 3600, 4093, 4096] {
        let v = random_vector(m, 7000 + m);
        let fwd = dft(&v, Direction::Forward).unwrap();
        if (fwd.norm() - v.norm()).abs() >= AMP_EPSILON {
            failures.push(format!("M={m}: Parseval violated"));
        }
        let back = dft(&fwd, Direction::Inverse).unwrap();
        let round_trip = back
            .entries()
            .iter()
            .zip(v.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if round_trip >= AMP_EPSILON {
            failures.push(format!("M={m}: inverse∘forward deviates by {round_trip}"));
        }
    }

    for m in [2u64, 3, 5, 8, 12, 31, 60, 127, 128, 257, 360, 511, 512] {
        let v = random_vector(m, 9000 + m);
        for dir in [Direction::Forward, Direction::Inverse] {
            let fast = dft(&v, dir).unwrap();
            let direct = dft_direct(&v, dir).unwrap();
            let diff = fast
                .entries()
                .iter()
                .zip(direct.entries())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if diff >= AMP_EPSILON {
                failures.push(format!("M={m}: fast vs direct differ by {diff}"));
            }
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        "6 numerical-hygiene",
        failures.is_empty(),
        elapsed,
        format!("{} deviations; first: {:?}", failures.len(), failures.first()),
    );
}

/// Criterion 7: identical config and master seed produce byte-identical run
/// logs (timing fields excluded) across two executions.
#[test]
fn c7_reproducibility() {
    let start = Instant::now();
    let cfg = parse_config_str(
        r#"{"algorithm":"dual-shor-sweep","trials":50,"master_seed":4242,
            "params":{"q":64,"divisors":[2,8,16],"runs":2},"report_format":"csv"}"#,
    )
    .unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_experiment(&cfg, d1.path()).unwrap();
    run_experiment(&cfg, d2.path()).unwrap();

    let normalized = |dir: &Path| -> Vec<String> {
        read_log(&dir.join("trials.jsonl"))
            .unwrap()
            .iter()
            .map(|r| normalized_record_line(r).unwrap())
            .collect()
    };
    let log1 = normalized(d1.path());
    let log2 = normalized(d2.path());
    let logs_equal = log1 == log2 && !log1.is_empty();

    // The CSV report and the aggregate stats carry no timing at all: both
    // must match byte for byte.
    let csv1 = std::fs::read(d1.path().join("summary.csv")).unwrap();
    let csv2 = std::fs::read(d2.path().join("summary.csv")).unwrap();
    let stats_equal = aggregate(&read_log(&d1.path().join("trials.jsonl")).unwrap())
        == aggregate(&read_log(&d2.path().join("trials.jsonl")).unwrap());

    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        "7 reproducibility",
        logs_equal && csv1 == csv2 && stats_equal,
        elapsed,
        format!(
            "normalized logs equal: {logs_equal}, csv equal: {}, stats equal: {stats_equal}",
            csv1 == csv2
        ),
    );
}
