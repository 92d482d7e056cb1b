//! Finite abelian domains and exact rational arithmetic.
//!
//! Two domain shapes cover everything in this crate: cyclic groups `Z_M`,
//! optionally tagged as a uniform grid over a real window, and elementary
//! abelian products `Z_p^n`. Frequencies `n/P`, binned outcomes `m/Q` and
//! continued-fraction convergents are kept as exact [`Rational`]s backed by
//! arbitrary-precision integers, so `Q = 2P^2` never overflows and binning
//! stays bit-exact.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

use crate::{Error, Result};

/// Guard on dense storage: domains above this size cannot be tabulated.
pub const MAX_DOMAIN_SIZE: u64 = 1 << 28;

/// Uniform discretization tag for a cyclic domain: index `k` stands for the
/// real point `k/R`, and frequency index `j` for `j*R/M` cycles per unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub samples_per_unit: u64,
}

/// A finite abelian simulation domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    /// The cyclic group `Z_M`, optionally a grid over a real window.
    Cyclic {
        modulus: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<GridSpec>,
    },
    /// The product group `Z_p^n` with `p` prime.
    Product { prime: u64, dim: u32 },
}

impl DomainSpec {
    /// Plain cyclic group `Z_M`.
    pub fn cyclic(modulus: u64) -> Result<Self> {
        let d = DomainSpec::Cyclic {
            modulus,
            grid: None,
        };
        d.validate()?;
        Ok(d)
    }

    /// Cyclic group `Z_M` read as a grid with `samples_per_unit` samples per
    /// real unit. `M` must be a multiple of the rate so the window covers a
    /// whole number of units.
    pub fn cyclic_grid(modulus: u64, samples_per_unit: u64) -> Result<Self> {
        let d = DomainSpec::Cyclic {
            modulus,
            grid: Some(GridSpec { samples_per_unit }),
        };
        d.validate()?;
        Ok(d)
    }

    /// Product group `Z_p^n`.
    pub fn product(prime: u64, dim: u32) -> Result<Self> {
        let d = DomainSpec::Product { prime, dim };
        d.validate()?;
        Ok(d)
    }

    /// Check the structural invariants (used by constructors and by
    /// deserialized values).
    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainSpec::Cyclic { modulus, grid } => {
                if modulus == 0 {
                    return Err(Error::InvalidDomain("cyclic modulus must be >= 1".into()));
                }
                if let Some(GridSpec { samples_per_unit }) = grid {
                    if samples_per_unit == 0 {
                        return Err(Error::InvalidDomain(
                            "grid samples_per_unit must be >= 1".into(),
                        ));
                    }
                    if modulus % samples_per_unit != 0 {
                        return Err(Error::InvalidDomain(format!(
                            "modulus {modulus} is not a multiple of samples_per_unit {samples_per_unit}"
                        )));
                    }
                }
            }
            DomainSpec::Product { prime, dim } => {
                if dim == 0 {
                    return Err(Error::InvalidDomain("product dimension must be >= 1".into()));
                }
                if !is_prime(prime) {
                    return Err(Error::InvalidDomain(format!("{prime} is not prime")));
                }
                self.size_checked()?;
            }
        }
        Ok(())
    }

    /// Number of elements.
    pub fn size(&self) -> u64 {
        self.size_checked()
            .expect("domain size checked at construction")
    }

    fn size_checked(&self) -> Result<u64> {
        match *self {
            DomainSpec::Cyclic { modulus, .. } => Ok(modulus),
            DomainSpec::Product { prime, dim } => {
                let mut size: u64 = 1;
                for _ in 0..dim {
                    size = size.checked_mul(prime).ok_or_else(|| {
                        Error::InvalidDomain(format!("p^n overflows for p={prime}, n={dim}"))
                    })?;
                    if size > MAX_DOMAIN_SIZE {
                        return Err(Error::InvalidDomain(format!(
                            "p^n = {prime}^{dim} exceeds dense-storage limit {MAX_DOMAIN_SIZE}"
                        )));
                    }
                }
                Ok(size)
            }
        }
    }

    /// Number of coordinates of a group element (1 for cyclic, `n` for
    /// products).
    pub fn arity(&self) -> usize {
        match *self {
            DomainSpec::Cyclic { .. } => 1,
            DomainSpec::Product { dim, .. } => dim as usize,
        }
    }

    /// Modulus along each coordinate.
    pub fn moduli(&self) -> Vec<u64> {
        match *self {
            DomainSpec::Cyclic { modulus, .. } => vec![modulus],
            DomainSpec::Product { prime, dim } => vec![prime; dim as usize],
        }
    }

    /// Grid tag, if present.
    pub fn grid(&self) -> Option<GridSpec> {
        match *self {
            DomainSpec::Cyclic { grid, .. } => grid,
            DomainSpec::Product { .. } => None,
        }
    }

    /// Element at flat index `i` (axis 0 is the least significant digit for
    /// product domains).
    pub fn element(&self, index: u64) -> GroupElement {
        debug_assert!(index < self.size());
        match *self {
            DomainSpec::Cyclic { .. } => GroupElement {
                coords: vec![index],
            },
            DomainSpec::Product { prime, dim } => {
                let mut coords = Vec::with_capacity(dim as usize);
                let mut rest = index;
                for _ in 0..dim {
                    coords.push(rest % prime);
                    rest /= prime;
                }
                GroupElement { coords }
            }
        }
    }

    /// Flat index of an element of this domain.
    pub fn index_of(&self, x: &GroupElement) -> Result<u64> {
        self.check_membership(x)?;
        match *self {
            DomainSpec::Cyclic { .. } => Ok(x.coords[0]),
            DomainSpec::Product { prime, .. } => {
                let mut index = 0u64;
                for &c in x.coords.iter().rev() {
                    index = index * prime + c;
                }
                Ok(index)
            }
        }
    }

    fn check_membership(&self, x: &GroupElement) -> Result<()> {
        let moduli = self.moduli();
        if x.coords.len() != moduli.len() {
            return Err(Error::DomainMismatch(format!(
                "element has {} coordinates, domain expects {}",
                x.coords.len(),
                moduli.len()
            )));
        }
        for (&c, &m) in x.coords.iter().zip(&moduli) {
            if c >= m {
                return Err(Error::DomainMismatch(format!(
                    "coordinate {c} out of range [0, {m})"
                )));
            }
        }
        Ok(())
    }
}

/// An element of a [`DomainSpec`], with each coordinate reduced modulo the
/// domain's modulus along that axis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    coords: Vec<u64>,
}

impl GroupElement {
    pub fn new(coords: Vec<u64>) -> Self {
        GroupElement { coords }
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }
}

/// Coordinatewise sum of `x` and `y` reduced modulo the domain moduli.
pub fn add(x: &GroupElement, y: &GroupElement, domain: &DomainSpec) -> Result<GroupElement> {
    domain.check_membership(x)?;
    domain.check_membership(y)?;
    let coords = x
        .coords
        .iter()
        .zip(&y.coords)
        .zip(domain.moduli())
        .map(|((&a, &b), m)| (a + b) % m)
        .collect();
    Ok(GroupElement { coords })
}

/// Euclidean gcd with the conventions `gcd(0, x) = x` and `gcd(0, 0) = 0`.
pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Deterministic primality test by trial division (domains here are small).
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.checked_mul(d).map_or(false, |dd| dd <= n) {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// A fraction in lowest terms with a positive denominator.
///
/// Backed by arbitrary-precision integers so frequency and binning arithmetic
/// never overflows.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    num: BigInt,
    den: BigInt,
}

impl Rational {
    /// Normalize `num/den`: sign moved to the numerator, fraction reduced.
    /// Zero denominators are rejected.
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self> {
        let mut num: BigInt = num.into();
        let mut den: BigInt = den.into();
        if den.is_zero() {
            return Err(Error::InvalidRational("zero denominator".into()));
        }
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        if num.is_zero() {
            return Ok(Rational {
                num,
                den: BigInt::from(1),
            });
        }
        let g = num.gcd(&den);
        Ok(Rational {
            num: num / &g,
            den: den / g,
        })
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational {
            num: n.into(),
            den: BigInt::from(1),
        }
    }

    pub fn zero() -> Self {
        Rational::from_integer(0)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn denominator(&self) -> &BigInt {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Denominator as `u64` when it fits.
    pub fn denominator_u64(&self) -> Option<u64> {
        u64::try_from(&self.den).ok()
    }

    /// `floor(k * self)` for nonnegative `k` and nonnegative `self`.
    pub fn floor_scaled(&self, k: impl Into<BigInt>) -> BigInt {
        (k.into() * &self.num).div_floor(&self.den)
    }

    pub fn to_f64(&self) -> f64 {
        // Good enough for reporting; exact paths never call this.
        let num = self.num.to_string().parse::<f64>().unwrap_or(f64::NAN);
        let den = self.den.to_string().parse::<f64>().unwrap_or(f64::NAN);
        num / den
    }
}

/// Spec-level alias for [`Rational::new`].
pub fn normalize(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Rational> {
    Rational::new(num, den)
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl std::str::FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.parse::<BigInt>()
                .map_err(|e| Error::InvalidRational(format!("{s:?}: {e}")))
        };
        match s.split_once('/') {
            Some((n, d)) => Rational::new(parse(n)?, parse(d)?),
            None => Ok(Rational::from_integer(parse(s)?)),
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        // Denominators are positive, so cross-multiplication preserves order.
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }
}

impl Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    /// Independent factorization oracle for small gcds.
    fn gcd_by_factorization(a: u64, b: u64) -> u64 {
        if a == 0 {
            return b;
        }
        if b == 0 {
            return a;
        }
        (1..=a.min(b)).filter(|d| a % d == 0 && b % d == 0).max().unwrap()
    }

    #[test]
    fn gcd_identity_case() {
        assert_eq!(gcd(0, 7), 7);
        assert_eq!(gcd(7, 0), 7);
        assert_eq!(gcd(0, 0), 0);
    }

    #[test]
    fn gcd_textbook() {
        assert_eq!(gcd(6, 9), 3);
    }

    #[test]
    fn gcd_coprime_pair() {
        assert_eq!(gcd_by_factorization(85, 256), 1);
        assert_eq!(gcd(85, 256), 1);
    }

    #[test]
    fn gcd_divides_and_is_greatest() {
        for a in 0..200u64 {
            for b in 0..200u64 {
                let g = gcd(a, b);
                if a != 0 || b != 0 {
                    assert_eq!(a % g, 0);
                    assert_eq!(b % g, 0);
                    for d in 1..=g {
                        if a % d == 0 && b % d == 0 {
                            assert_eq!(g % d, 0, "common divisor {d} must divide gcd({a},{b})");
                        }
                    }
                } else {
                    assert_eq!(g, 0);
                }
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let r = normalize(10, 32).unwrap();
        assert_eq!(r.to_string(), "5/16");
        let r = normalize(0, 5).unwrap();
        assert_eq!(r.to_string(), "0/1");
        let r = normalize(-21, 63).unwrap();
        assert_eq!(r.to_string(), "-1/3");
        let r = normalize(21, -63).unwrap();
        assert_eq!(r.to_string(), "-1/3");
    }

    #[test]
    fn normalize_zero_denominator_is_error() {
        assert!(normalize(1, 0).is_err());
    }

    #[test]
    fn normalize_scale_invariance() {
        let mut rng = rng(11);
        for _ in 0..1000 {
            let a = rng.gen_range(-500i64..500);
            let b = rng.gen_range(1i64..500) * if rng.gen() { 1 } else { -1 };
            let k = rng.gen_range(1i64..50) * if rng.gen() { 1 } else { -1 };
            assert_eq!(normalize(a * k, b * k).unwrap(), normalize(a, b).unwrap());
        }
    }

    #[test]
    fn rational_ordering_and_parse() {
        let a: Rational = "1/3".parse().unwrap();
        let b: Rational = "85/256".parse().unwrap();
        assert!(a > b);
        assert_eq!("-4/8".parse::<Rational>().unwrap().to_string(), "-1/2");
        assert_eq!("7".parse::<Rational>().unwrap().to_string(), "7/1");
    }

    #[test]
    fn add_mod8() {
        let d = DomainSpec::cyclic(8).unwrap();
        let z = add(
            &GroupElement::new(vec![5]),
            &GroupElement::new(vec![6]),
            &d,
        )
        .unwrap();
        assert_eq!(z.coords(), &[3]);
    }

    #[test]
    fn add_xor_in_z2_squared() {
        let d = DomainSpec::product(2, 2).unwrap();
        let z = add(
            &GroupElement::new(vec![1, 1]),
            &GroupElement::new(vec![1, 0]),
            &d,
        )
        .unwrap();
        assert_eq!(z.coords(), &[0, 1]);
    }

    #[test]
    fn add_trivial_group() {
        let d = DomainSpec::cyclic(1).unwrap();
        let z = add(
            &GroupElement::new(vec![0]),
            &GroupElement::new(vec![0]),
            &d,
        )
        .unwrap();
        assert_eq!(z.coords(), &[0]);
    }

    #[test]
    fn add_rejects_mismatched_elements() {
        let d = DomainSpec::product(2, 2).unwrap();
        assert!(add(
            &GroupElement::new(vec![1]),
            &GroupElement::new(vec![1, 0]),
            &d
        )
        .is_err());
        let c = DomainSpec::cyclic(4).unwrap();
        assert!(add(
            &GroupElement::new(vec![5]),
            &GroupElement::new(vec![1]),
            &c
        )
        .is_err());
    }

    #[test]
    fn add_is_commutative_associative_with_identity() {
        let domains = [
            DomainSpec::cyclic(12).unwrap(),
            DomainSpec::product(3, 3).unwrap(),
            DomainSpec::product(2, 5).unwrap(),
        ];
        let mut rng = rng(7);
        for _ in 0..1000 {
            let d = &domains[rng.gen_range(0..domains.len())];
            let n = d.size();
            let x = d.element(rng.gen_range(0..n));
            let y = d.element(rng.gen_range(0..n));
            let z = d.element(rng.gen_range(0..n));
            let e = d.element(0);
            assert_eq!(add(&x, &y, d).unwrap(), add(&y, &x, d).unwrap());
            assert_eq!(
                add(&add(&x, &y, d).unwrap(), &z, d).unwrap(),
                add(&x, &add(&y, &z, d).unwrap(), d).unwrap()
            );
            assert_eq!(add(&x, &e, d).unwrap(), x);
        }
    }

    #[test]
    fn domain_validation() {
        assert!(DomainSpec::cyclic(0).is_err());
        assert!(DomainSpec::product(4, 2).is_err());
        assert!(DomainSpec::product(2, 0).is_err());
        assert!(DomainSpec::cyclic_grid(63, 2).is_err()); // 2 does not divide 63
        assert!(DomainSpec::cyclic_grid(64, 2).is_ok());
    }

    #[test]
    fn index_element_roundtrip() {
        let d = DomainSpec::product(3, 3).unwrap();
        for i in 0..d.size() {
            let x = d.element(i);
            assert_eq!(d.index_of(&x).unwrap(), i);
        }
    }

    #[test]
    fn domain_serde_roundtrip() {
        let d = DomainSpec::cyclic_grid(63, 1).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<DomainSpec>(&s).unwrap(), d);
        let p = DomainSpec::product(2, 4).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<DomainSpec>(&s).unwrap(), p);
    }
}
