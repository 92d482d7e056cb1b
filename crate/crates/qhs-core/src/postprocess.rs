//! Classical recovery: continued-fraction reconstruction, gcd folding, and
//! mod-p linear algebra.
//!
//! Continued fractions are kept canonical (last quotient >= 2 unless the
//! expansion is a single integer) so expansions are unique and comparable.
//! Subspaces are represented by reduced row-echelon bases, making equality
//! of subspaces a plain data equality.

use serde::{Deserialize, Serialize};

use crate::groups::{self, Rational};
use crate::simulator::BinnedOutcome;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Continued fractions
// ---------------------------------------------------------------------------

/// Canonical simple continued fraction `[a0; a1, a2, ...]` of a nonnegative
/// rational: `a0 >= 0`, later quotients `>= 1`, and the last quotient `>= 2`
/// unless the expansion is the single integer `a0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    quotients: Vec<u64>,
}

impl ContinuedFraction {
    /// Validate an explicit quotient list against the canonical form.
    pub fn new(quotients: Vec<u64>) -> Result<Self> {
        if quotients.is_empty() {
            return Err(Error::InvalidRational("empty continued fraction".into()));
        }
        if quotients.iter().skip(1).any(|&a| a == 0) {
            return Err(Error::InvalidRational(
                "continued fraction quotients after the first must be >= 1".into(),
            ));
        }
        if quotients.len() > 1 && *quotients.last().unwrap() < 2 {
            return Err(Error::InvalidRational(
                "canonical continued fraction must end with a quotient >= 2".into(),
            ));
        }
        Ok(ContinuedFraction { quotients })
    }

    pub fn quotients(&self) -> &[u64] {
        &self.quotients
    }

    /// The exact value of the expansion (the last convergent).
    pub fn evaluate(&self) -> Rational {
        convergents(self).pop().expect("at least one convergent")
    }
}

/// Canonical continued fraction of `m/Q` via the Euclidean algorithm.
/// The fraction is reduced first, so `cf_expand(10, 32)` expands `5/16`.
pub fn cf_expand(m: u64, q: u64) -> ContinuedFraction {
    assert!(q > 0, "denominator must be positive");
    let g = groups::gcd(m, q);
    let (mut a, mut b) = if g == 0 { (0, 1) } else { (m / g, q / g) };
    let mut quotients = Vec::new();
    loop {
        quotients.push(a / b);
        let r = a % b;
        if r == 0 {
            break;
        }
        a = b;
        b = r;
    }
    ContinuedFraction { quotients }
}

/// Convergents `h_k / k_k` by the standard recursion
/// `h_k = a_k h_{k-1} + h_{k-2}`, `k_k = a_k k_{k-1} + k_{k-2}`.
pub fn convergents(cf: &ContinuedFraction) -> Vec<Rational> {
    use num_bigint::BigInt;
    let mut out = Vec::with_capacity(cf.quotients.len());
    let (mut h_prev, mut h) = (BigInt::from(0), BigInt::from(1));
    let (mut k_prev, mut k) = (BigInt::from(1), BigInt::from(0));
    for &a in &cf.quotients {
        let h_next = BigInt::from(a) * &h + &h_prev;
        let k_next = BigInt::from(a) * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        out.push(Rational::new(h.clone(), k.clone()).expect("positive denominator"));
    }
    out
}

/// Largest denominator bound `b` with `2 b^2 <= q`; the reconstruction
/// guarantee applies to denominators up to this bound.
pub fn max_denominator_bound(q: u64) -> u64 {
    let mut b = ((q / 2) as f64).sqrt() as u64 + 2;
    while b > 0 && 2u128 * (b as u128) * (b as u128) > q as u128 {
        b -= 1;
    }
    b
}

/// Recover the unique well-approximating rational from a binned outcome
/// `m/Q`: the convergent of `m/Q` with the largest denominator
/// `<= denom_bound`. Callers wanting the uniqueness guarantee must ensure
/// `Q >= 2 * denom_bound^2`. Returns `None` when only the trivial `0/1`
/// qualifies for a nonzero outcome.
pub fn recover_rational(outcome: &BinnedOutcome, denom_bound: u64) -> Option<Rational> {
    let cf = cf_expand(outcome.m, outcome.q);
    let convs = convergents(&cf);
    let best = convs
        .iter()
        .rev()
        .find(|r| r.denominator_u64().is_some_and(|d| d <= denom_bound))?;
    if best.is_zero() && outcome.m != 0 {
        None
    } else {
        Some(best.clone())
    }
}

/// Fold a list of measured eigenvalues with the Euclidean gcd
/// (`gcd(0, x) = x`). An all-zero (or empty) list yields 0, which callers
/// must treat as "retry".
pub fn gcd_recover(outcomes: &[u64]) -> u64 {
    outcomes.iter().fold(0, |acc, &x| groups::gcd(acc, x))
}

// ---------------------------------------------------------------------------
// Subspaces of Z_p^n
// ---------------------------------------------------------------------------

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Multiplicative inverse mod prime `p` (Fermat).
fn inv_mod(a: u64, p: u64) -> u64 {
    debug_assert!(a % p != 0);
    pow_mod(a, p - 2, p)
}

/// A subspace of `Z_p^n` held as a reduced row-echelon basis, the canonical
/// representation: two values compare equal iff they span the same subspace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceBasis {
    p: u64,
    n: u32,
    rows: Vec<Vec<u64>>,
}

impl SubspaceBasis {
    /// The zero subspace of `Z_p^n`.
    pub fn zero(p: u64, n: u32) -> Result<Self> {
        if !groups::is_prime(p) {
            return Err(Error::InvalidDomain(format!("{p} is not prime")));
        }
        if n == 0 {
            return Err(Error::InvalidDomain("dimension must be >= 1".into()));
        }
        Ok(SubspaceBasis {
            p,
            n,
            rows: Vec::new(),
        })
    }

    /// Span of arbitrary vectors (dependent input is fine; the rank is
    /// whatever survives reduction).
    pub fn from_vectors(p: u64, n: u32, vectors: &[Vec<u64>]) -> Result<Self> {
        let mut basis = SubspaceBasis::zero(p, n)?;
        for v in vectors {
            basis.insert(v)?;
        }
        Ok(basis)
    }

    /// Span of vectors that are required to be independent mod p.
    pub fn from_independent(p: u64, n: u32, vectors: &[Vec<u64>]) -> Result<Self> {
        let basis = SubspaceBasis::from_vectors(p, n, vectors)?;
        if basis.dim() != vectors.len() {
            return Err(Error::DependentBasis { p });
        }
        Ok(basis)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Ambient dimension `n`.
    pub fn ambient_dim(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Echelon basis rows (empty for the zero subspace).
    pub fn vectors(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.n as usize
    }

    fn check_vector(&self, v: &[u64]) -> Result<()> {
        if v.len() != self.n as usize {
            return Err(Error::SampleOutOfRange(format!(
                "vector has {} coordinates, ambient space has {}",
                v.len(),
                self.n
            )));
        }
        if let Some(&c) = v.iter().find(|&&c| c >= self.p) {
            return Err(Error::SampleOutOfRange(format!(
                "coordinate {c} out of range [0, {})",
                self.p
            )));
        }
        Ok(())
    }

    /// Reduce `v` against the basis, zeroing every pivot coordinate. The
    /// result is the canonical representative of `v + span`.
    pub fn reduce(&self, v: &[u64]) -> Result<Vec<u64>> {
        self.check_vector(v)?;
        let p = self.p;
        let mut v = v.to_vec();
        for row in &self.rows {
            let pivot = row.iter().position(|&c| c != 0).expect("nonzero row");
            let coeff = v[pivot];
            if coeff != 0 {
                for (vc, &rc) in v.iter_mut().zip(row) {
                    *vc = (*vc + (p - mul_mod(coeff, rc, p)) % p) % p;
                }
            }
        }
        Ok(v)
    }

    pub fn contains(&self, v: &[u64]) -> Result<bool> {
        Ok(self.reduce(v)?.iter().all(|&c| c == 0))
    }

    /// Insert a vector, keeping the rows in reduced row-echelon form.
    /// Returns true when the rank grew.
    pub fn insert(&mut self, v: &[u64]) -> Result<bool> {
        let p = self.p;
        let mut v = self.reduce(v)?;
        let Some(pivot) = v.iter().position(|&c| c != 0) else {
            return Ok(false);
        };
        let inv = inv_mod(v[pivot], p);
        for c in v.iter_mut() {
            *c = mul_mod(*c, inv, p);
        }
        // Back-eliminate the new pivot from existing rows, then keep rows
        // ordered by pivot column.
        for row in &mut self.rows {
            let coeff = row[pivot];
            if coeff != 0 {
                for (rc, &vc) in row.iter_mut().zip(&v) {
                    *rc = (*rc + (p - mul_mod(coeff, vc, p)) % p) % p;
                }
            }
        }
        let pos = self
            .rows
            .iter()
            .position(|row| row.iter().position(|&c| c != 0).unwrap() > pivot)
            .unwrap_or(self.rows.len());
        self.rows.insert(pos, v);
        Ok(true)
    }

    /// Basis of `{y : x·y = 0 mod p for all x in the span}` in canonical
    /// echelon form. Dimensions always satisfy `dim + dim⊥ = n`.
    pub fn orthogonal_complement(&self) -> SubspaceBasis {
        let n = self.n as usize;
        let p = self.p;
        let pivots: Vec<usize> = self
            .rows
            .iter()
            .map(|row| row.iter().position(|&c| c != 0).unwrap())
            .collect();
        let mut complement = Vec::new();
        for f in 0..n {
            if pivots.contains(&f) {
                continue;
            }
            // Free coordinate f = 1; pivot coordinates balance their row.
            let mut y = vec![0u64; n];
            y[f] = 1;
            for (row, &piv) in self.rows.iter().zip(&pivots) {
                y[piv] = (p - row[f] % p) % p;
            }
            complement.push(y);
        }
        SubspaceBasis::from_vectors(p, self.n, &complement)
            .expect("complement vectors are valid by construction")
    }
}

/// Streaming rank accumulator for sampled vectors: single-owner, feeds
/// [`recover_subspace`].
#[derive(Debug)]
pub struct SubspaceAccumulator {
    span: SubspaceBasis,
    consumed: u64,
    last_rank_gain: u64,
    since_gain: u64,
}

impl SubspaceAccumulator {
    pub fn new(p: u64, n: u32) -> Result<Self> {
        Ok(SubspaceAccumulator {
            span: SubspaceBasis::zero(p, n)?,
            consumed: 0,
            last_rank_gain: 0,
            since_gain: 0,
        })
    }

    /// Feed one sample; returns true when the rank grew.
    pub fn push(&mut self, v: &[u64]) -> Result<bool> {
        self.consumed += 1;
        let gained = self.span.insert(v)?;
        if gained {
            self.last_rank_gain = self.consumed;
            self.since_gain = 0;
        } else {
            self.since_gain += 1;
        }
        Ok(gained)
    }

    pub fn span(&self) -> &SubspaceBasis {
        &self.span
    }

    pub fn samples_consumed(&self) -> u64 {
        self.consumed
    }

    /// 1-based index of the last rank-raising sample (0 when none raised the
    /// rank): the point at which the span stabilized.
    pub fn stabilized_at(&self) -> u64 {
        self.last_rank_gain
    }

    pub fn samples_since_rank_gain(&self) -> u64 {
        self.since_gain
    }
}

/// Outcome of a streaming subspace recovery.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubspaceRecovery {
    /// Candidate hidden subspace (`None` when the sample budget ran out
    /// before the span stabilized).
    pub basis: Option<SubspaceBasis>,
    pub samples_consumed: u64,
    /// 1-based index of the last rank-raising sample (0 if none).
    pub stabilized_at: u64,
}

/// Accumulate sampled vectors from `V⊥` until `patience` consecutive samples
/// add no rank, then return the orthogonal complement of the accumulated
/// span as the candidate `V`. Gives up after `max_samples`.
pub fn recover_subspace<I>(
    p: u64,
    n: u32,
    samples: I,
    max_samples: u64,
    patience: u64,
) -> Result<SubspaceRecovery>
where
    I: IntoIterator<Item = Vec<u64>>,
{
    if patience == 0 {
        return Err(Error::config("patience must be >= 1"));
    }
    let mut acc = SubspaceAccumulator::new(p, n)?;
    for v in samples.into_iter().take(max_samples as usize) {
        acc.push(&v)?;
        if acc.samples_since_rank_gain() >= patience {
            return Ok(SubspaceRecovery {
                basis: Some(acc.span().orthogonal_complement()),
                samples_consumed: acc.samples_consumed(),
                stabilized_at: acc.stabilized_at(),
            });
        }
    }
    Ok(SubspaceRecovery {
        basis: None,
        samples_consumed: acc.samples_consumed(),
        stabilized_at: acc.stabilized_at(),
    })
}
