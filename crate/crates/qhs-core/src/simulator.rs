//! Exact execution of the QHS circuit and the binning observable.
//!
//! Two redundant routes compute the post-circuit argument-register
//! distribution: [`left_marginal`] groups domain points by label and
//! transforms one indicator per label (the production path, `O(L·M log M)`),
//! while [`full_state_evolve`] runs the literal `|0⟩|0⟩ → F⁻¹ → U_φ → F`
//! evolution on the dense bipartite state. Their marginals must agree to
//! working precision; the equivalence is enforced across the test suites.

use num_bigint::BigInt;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::groups::{DomainSpec, GridSpec, Rational};
use crate::oracle::{apply_oracle_unitary, BipartiteState, OracleInstance};
use crate::spectral::{self, Direction};
use crate::tolerances::PROB_EPSILON;
use crate::{Error, Result};

/// Exact argument-register measurement distribution after the circuit, with
/// the per-frequency value-class amplitude vectors (the Ω components).
#[derive(Clone, Debug)]
pub struct SpectralDistribution {
    domain: DomainSpec,
    prob: Vec<f64>,
    omega: Vec<Vec<Complex64>>,
}

impl SpectralDistribution {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    /// Unnormalized value-class amplitudes at frequency index `j`, one entry
    /// per label; `prob(j)` is the squared norm of this vector.
    pub fn omega(&self, j: u64) -> &[Complex64] {
        &self.omega[j as usize]
    }

    /// Check the distribution invariants: probabilities sum to one and each
    /// equals the squared norm of its Ω vector.
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.prob.iter().sum();
        if (total - 1.0).abs() > PROB_EPSILON {
            return Err(Error::InvalidDomain(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        for (j, (&p, omega)) in self.prob.iter().zip(&self.omega).enumerate() {
            let norm: f64 = omega.iter().map(|z| z.norm_sqr()).sum();
            if (p - norm).abs() > PROB_EPSILON {
                return Err(Error::InvalidDomain(format!(
                    "prob({j}) = {p} but ‖Ω({j})‖² = {norm}"
                )));
            }
        }
        Ok(())
    }

    /// Frequency label for reports: `j·R/M` as an exact rational on grid
    /// domains, the integer eigenvalue `j` on plain cyclic domains, and the
    /// coordinate tuple on product domains.
    pub fn frequency_string(&self, j: u64) -> String {
        match self.domain {
            DomainSpec::Cyclic {
                modulus,
                grid: Some(GridSpec { samples_per_unit }),
            } => Rational::new(BigInt::from(j) * samples_per_unit, modulus)
                .expect("positive modulus")
                .to_string(),
            DomainSpec::Cyclic { .. } => Rational::from_integer(j).to_string(),
            DomainSpec::Product { .. } => {
                let coords = self.domain.element(j);
                coords
                    .coords()
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(":")
            }
        }
    }

    /// Export as CSV with the documented header
    /// `index,frequency,probability`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,frequency,probability")?;
        for (j, &p) in self.prob.iter().enumerate() {
            writeln!(out, "{j},{},{p}", self.frequency_string(j as u64))?;
        }
        Ok(())
    }
}

/// A binned measurement outcome: the eigenvalue `m/Q` of the floor
/// observable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinnedOutcome {
    pub m: u64,
    pub q: u64,
}

/// Post-circuit argument-register distribution, grouped by label.
///
/// For each label `s`, the indicator of `{x : φ(x) = s}` scaled by
/// `1/sqrt(N)` is transformed forward; its value at `j` is the `s` component
/// of Ω(j), and `prob(j)` sums the squared components.
pub fn left_marginal(o: &OracleInstance) -> SpectralDistribution {
    let domain = o.domain().clone();
    let n = domain.size() as usize;
    let l = o.label_count() as usize;
    let scale = 1.0 / (n as f64).sqrt();

    let mut omega = vec![vec![Complex64::new(0.0, 0.0); l]; n];
    let mut prob = vec![0.0f64; n];
    let mut f = vec![Complex64::new(0.0, 0.0); n];

    let cyclic_kernel = match domain {
        DomainSpec::Cyclic { .. } => Some(spectral::CyclicKernel::new(n, Direction::Forward)),
        DomainSpec::Product { .. } => None,
    };

    for s in 0..l {
        for (x, slot) in f.iter_mut().enumerate() {
            *slot = if o.table()[x] as usize == s {
                Complex64::new(scale, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        match (&domain, &cyclic_kernel) {
            (DomainSpec::Cyclic { .. }, Some(kernel)) => kernel.apply(&mut f),
            (DomainSpec::Product { prime, dim }, _) => spectral::product_transform_in_place(
                &mut f,
                *prime as usize,
                *dim as usize,
                Direction::Forward,
            ),
            _ => unreachable!(),
        }
        for (j, &z) in f.iter().enumerate() {
            omega[j][s] = z;
            prob[j] += z.norm_sqr();
        }
    }

    SpectralDistribution {
        domain,
        prob,
        omega,
    }
}

/// Run the circuit literally on the dense `(N·L)`-entry product state:
/// initialize `|0⟩|0⟩`, inverse-transform the argument register, apply the
/// oracle unitary, forward-transform. The left marginal of the result must
/// match [`left_marginal`].
pub fn full_state_evolve(o: &OracleInstance) -> Result<BipartiteState> {
    let mut state = BipartiteState::initial(o.domain().clone(), o.label_count())?;
    state.apply_left_transform(Direction::Inverse);
    let mut state = apply_oracle_unitary(state, o)?;
    state.apply_left_transform(Direction::Forward);
    Ok(state)
}

/// Sample a frequency index by inverse CDF over the probability table.
/// Deterministic given the RNG stream.
pub fn measure<R: Rng>(dist: &SpectralDistribution, rng: &mut R) -> u64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_supported = 0u64;
    for (j, &p) in dist.prob.iter().enumerate() {
        if p > 0.0 {
            last_supported = j as u64;
        }
        acc += p;
        if u < acc {
            return j as u64;
        }
    }
    // Total probability may round to slightly below 1; fall back to the last
    // supported index.
    last_supported
}

/// Bin a measured grid frequency by the floor observable: the index `j`
/// stands for `y = j·R/M` cycles per unit, and the outcome is
/// `m = ⌊Q·y⌋` with `m/Q ≤ y < (m+1)/Q`. Exact integer arithmetic
/// throughout.
pub fn bin_frequency(j: u64, domain: &DomainSpec, q: u64) -> Result<BinnedOutcome> {
    let DomainSpec::Cyclic {
        modulus,
        grid: Some(GridSpec { samples_per_unit }),
    } = *domain
    else {
        return Err(Error::MissingGrid);
    };
    if q == 0 {
        return Err(Error::config("binning modulus Q must be >= 1"));
    }
    let y = Rational::new(BigInt::from(j) * samples_per_unit, modulus)?;
    let m = u64::try_from(y.floor_scaled(q)).map_err(|_| {
        Error::SampleOutOfRange(format!("binned outcome for j={j} exceeds u64"))
    })?;
    Ok(BinnedOutcome { m, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_periodic_oracle, make_subspace_oracle, HiddenStructure};
    use crate::tolerances::AMP_EPSILON;
    use rand::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn marginal_of_half_period_oracle() {
        let o = make_periodic_oracle(4, 2, true, &mut rng(1)).unwrap();
        let dist = left_marginal(&o);
        dist.validate().unwrap();
        let p = dist.probabilities();
        assert!((p[0] - 0.5).abs() < AMP_EPSILON);
        assert!((p[2] - 0.5).abs() < AMP_EPSILON);
        assert!(p[1] < AMP_EPSILON && p[3] < AMP_EPSILON);
    }

    #[test]
    fn marginal_of_constant_oracle_is_delta() {
        let o = make_periodic_oracle(4, 1, true, &mut rng(2)).unwrap();
        let dist = left_marginal(&o);
        dist.validate().unwrap();
        assert!((dist.probabilities()[0] - 1.0).abs() < AMP_EPSILON);
        for j in 1..4 {
            assert!(dist.probabilities()[j] < AMP_EPSILON);
        }
    }

    #[test]
    fn marginal_of_quarter_period_oracle() {
        let o = make_periodic_oracle(8, 4, true, &mut rng(3)).unwrap();
        let dist = left_marginal(&o);
        for (j, &p) in dist.probabilities().iter().enumerate() {
            if j % 2 == 0 {
                assert!((p - 0.25).abs() < AMP_EPSILON, "j={j}");
            } else {
                assert!(p < AMP_EPSILON, "j={j}");
            }
        }
    }

    #[test]
    fn support_law_for_injective_oracles() {
        for m in 1..=32u64 {
            for d in (1..=m).filter(|d| m % d == 0) {
                let o = make_periodic_oracle(m, d, true, &mut rng(100 + m * 37 + d)).unwrap();
                let dist = left_marginal(&o);
                dist.validate().unwrap();
                let comb = m / d;
                for (j, &p) in dist.probabilities().iter().enumerate() {
                    if j as u64 % comb == 0 {
                        assert!(
                            (p - 1.0 / d as f64).abs() < AMP_EPSILON,
                            "M={m}, d={d}, j={j}"
                        );
                    } else {
                        assert!(p < AMP_EPSILON, "M={m}, d={d}, j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn full_state_small_cases() {
        // d = 1 on Z_2: no structure, everything returns to |0⟩|s0⟩.
        let o = make_periodic_oracle(2, 1, true, &mut rng(4)).unwrap();
        let psi = full_state_evolve(&o).unwrap();
        assert!((psi.amp(0, 0).re - 1.0).abs() < AMP_EPSILON);

        // d = 2 on Z_4: left marginal uniform on {0, 2}.
        let o = make_periodic_oracle(4, 2, true, &mut rng(5)).unwrap();
        let probs = full_state_evolve(&o).unwrap().left_marginal_probs();
        assert!((probs[0] - 0.5).abs() < AMP_EPSILON);
        assert!((probs[2] - 0.5).abs() < AMP_EPSILON);

        // d = 4 on Z_4 (all labels distinct): flat spectrum.
        let o = make_periodic_oracle(4, 4, true, &mut rng(6)).unwrap();
        let probs = full_state_evolve(&o).unwrap().left_marginal_probs();
        for p in probs {
            assert!((p - 0.25).abs() < AMP_EPSILON);
        }
    }

    #[test]
    fn full_state_size_guard() {
        let o = make_periodic_oracle(4096, 4096, true, &mut rng(7)).unwrap();
        match full_state_evolve(&o) {
            Err(Error::StateTooLarge { .. }) => {}
            other => panic!("expected size-guard error, got {other:?}"),
        }
    }

    #[test]
    fn marginal_agrees_with_full_state() {
        for m in 1..=24u64 {
            for d in (1..=m).filter(|d| m % d == 0) {
                for injective in [true, false] {
                    let o =
                        make_periodic_oracle(m, d, injective, &mut rng(m * 101 + d * 7)).unwrap();
                    let grouped = left_marginal(&o);
                    let literal = full_state_evolve(&o).unwrap().left_marginal_probs();
                    assert!(
                        max_abs_diff(grouped.probabilities(), &literal) < AMP_EPSILON,
                        "M={m}, d={d}, injective={injective}"
                    );
                }
            }
        }
        // Product-domain families.
        for (p, n, basis) in [
            (2u64, 2u32, vec![vec![1u64, 1]]),
            (2, 2, vec![]),
            (2, 3, vec![vec![1, 0, 1], vec![0, 1, 0]]),
            (3, 2, vec![vec![1, 2]]),
        ] {
            let o = make_subspace_oracle(p, n, &basis, &mut rng(500 + p * 31 + n as u64)).unwrap();
            let grouped = left_marginal(&o);
            let literal = full_state_evolve(&o).unwrap().left_marginal_probs();
            assert!(
                max_abs_diff(grouped.probabilities(), &literal) < AMP_EPSILON,
                "p={p}, n={n}"
            );
        }
    }

    #[test]
    fn subspace_marginal_uniform_on_complement() {
        // V = span{(1,1)} in Z_2²: marginal uniform on the flat indices of
        // V⊥ = {(0,0), (1,1)}, which are 0 and 3.
        let o = make_subspace_oracle(2, 2, &[vec![1, 1]], &mut rng(8)).unwrap();
        let dist = left_marginal(&o);
        let p = dist.probabilities();
        assert!((p[0] - 0.5).abs() < AMP_EPSILON);
        assert!((p[3] - 0.5).abs() < AMP_EPSILON);
        assert!(p[1] < AMP_EPSILON && p[2] < AMP_EPSILON);
    }

    #[test]
    fn relabeling_leaves_marginal_unchanged() {
        use rand::seq::SliceRandom;
        let mut r = rng(9);
        for (m, d) in [(12u64, 4u64), (16, 8), (9, 3)] {
            let o = make_periodic_oracle(m, d, true, &mut r).unwrap();
            let mut bijection: Vec<u32> = (0..o.label_count()).collect();
            bijection.shuffle(&mut r);
            let relabeled: Vec<u32> = o.table().iter().map(|&s| bijection[s as usize]).collect();
            let o2 = OracleInstance::from_parts(
                o.domain().clone(),
                relabeled,
                o.label_count(),
                o.injective(),
                HiddenStructure::Period { d },
            )
            .unwrap();
            let a = left_marginal(&o);
            let b = left_marginal(&o2);
            assert!(max_abs_diff(a.probabilities(), b.probabilities()) < AMP_EPSILON);
        }
    }

    #[test]
    fn measure_delta_distribution() {
        let o = make_periodic_oracle(4, 1, true, &mut rng(10)).unwrap();
        let dist = left_marginal(&o);
        let mut r = rng(11);
        for _ in 0..100 {
            assert_eq!(measure(&dist, &mut r), 0);
        }
    }

    #[test]
    fn measure_uniform_pair_statistics() {
        let o = make_periodic_oracle(4, 2, true, &mut rng(12)).unwrap();
        let dist = left_marginal(&o);
        let mut r = rng(13);
        let mut counts = [0u64; 4];
        for _ in 0..10_000 {
            counts[measure(&dist, &mut r) as usize] += 1;
        }
        assert_eq!(counts[1], 0);
        assert_eq!(counts[3], 0);
        let f0 = counts[0] as f64 / 10_000.0;
        assert!((f0 - 0.5).abs() < 0.02, "empirical frequency {f0}");
    }

    #[test]
    fn measure_is_deterministic_given_seed() {
        let o = make_periodic_oracle(16, 8, true, &mut rng(14)).unwrap();
        let dist = left_marginal(&o);
        let draw = |seed| {
            let mut r = rng(seed);
            (0..50).map(|_| measure(&dist, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(77), draw(77));
        assert_ne!(draw(77), draw(78));
    }

    #[test]
    fn bin_frequency_examples() {
        let d = DomainSpec::cyclic_grid(63, 1).unwrap();
        assert_eq!(bin_frequency(21, &d, 32).unwrap(), BinnedOutcome { m: 10, q: 32 });
        assert_eq!(bin_frequency(42, &d, 32).unwrap(), BinnedOutcome { m: 21, q: 32 });
        assert_eq!(bin_frequency(0, &d, 32).unwrap(), BinnedOutcome { m: 0, q: 32 });
        assert_eq!(bin_frequency(0, &d, 7).unwrap(), BinnedOutcome { m: 0, q: 7 });
    }

    #[test]
    fn bin_frequency_requires_grid() {
        let d = DomainSpec::cyclic(63).unwrap();
        assert!(matches!(bin_frequency(21, &d, 32), Err(Error::MissingGrid)));
    }

    #[test]
    fn bin_frequency_is_monotone() {
        let d = DomainSpec::cyclic_grid(120, 2).unwrap();
        for q in [1u64, 7, 32, 101] {
            let mut prev = 0;
            for j in 0..120 {
                let m = bin_frequency(j, &d, q).unwrap().m;
                assert!(m >= prev, "binning must be monotone in j (q={q}, j={j})");
                prev = m;
            }
        }
    }

    #[test]
    fn spectrum_support_examples() {
        let o = make_periodic_oracle(4, 2, true, &mut rng(15)).unwrap();
        let dist = left_marginal(&o);
        assert_eq!(spectral::spectrum_support(&dist, 1e-12), vec![0, 2]);

        let o = make_periodic_oracle(4, 1, true, &mut rng(16)).unwrap();
        let dist = left_marginal(&o);
        assert_eq!(spectral::spectrum_support(&dist, 1e-12), vec![0]);

        let degenerate = SpectralDistribution {
            domain: DomainSpec::cyclic(4).unwrap(),
            prob: vec![0.0; 4],
            omega: vec![vec![]; 4],
        };
        assert!(spectral::spectrum_support(&degenerate, 1e-12).is_empty());
    }

    #[test]
    fn csv_export_shape() {
        let o = make_periodic_oracle(4, 2, true, &mut rng(17)).unwrap();
        let dist = left_marginal(&o);
        let mut buf = Vec::new();
        dist.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "index,frequency,probability");
        assert!(lines[1].starts_with("0,0/1,"));

        // Grid domains report the exact rational frequency.
        let o = crate::oracle::make_periodic_grid_oracle(63, 1, 3, true, &mut rng(18)).unwrap();
        let dist = left_marginal(&o);
        assert_eq!(dist.frequency_string(21), "1/3");
        assert_eq!(dist.frequency_string(0), "0/1");
    }
}
