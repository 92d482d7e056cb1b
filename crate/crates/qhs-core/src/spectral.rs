//! Exact unitary discrete Fourier transforms over cyclic and product domains.
//!
//! Sign convention: the forward transform uses the kernel `e^{-2πi x y / M}`
//! and the inverse its conjugate. Both directions carry the `1/sqrt(M)`
//! normalization, so each is unitary and `inverse ∘ forward` is the identity.
//!
//! Two computation routes are shipped on purpose: a fast path (planned FFT,
//! any size) and a direct summation path ([`dft_direct`],
//! [`dft_product_direct`]) that serves as an independent cross-check in the
//! test suites.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::f64::consts::TAU;
use std::sync::Arc;

use crate::groups::DomainSpec;
use crate::simulator::SpectralDistribution;
use crate::{Error, Result};

/// Transform direction. Forward is the `e^{-2πixy}` kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

/// A complex amplitude per element of a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeVector {
    domain: DomainSpec,
    entries: Vec<Complex64>,
}

impl AmplitudeVector {
    pub fn from_entries(domain: DomainSpec, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() as u64 != domain.size() {
            return Err(Error::DomainMismatch(format!(
                "amplitude vector has {} entries, domain has {} elements",
                entries.len(),
                domain.size()
            )));
        }
        Ok(AmplitudeVector { domain, entries })
    }

    pub fn zero(domain: DomainSpec) -> Self {
        let n = domain.size() as usize;
        AmplitudeVector {
            domain,
            entries: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Basis state `|index⟩`.
    pub fn delta(domain: DomainSpec, index: u64) -> Self {
        let mut v = AmplitudeVector::zero(domain);
        v.entries[index as usize] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Planned unitary 1-D transform, reusable across many vectors of one size.
pub(crate) struct CyclicKernel {
    fft: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl CyclicKernel {
    pub(crate) fn new(len: usize, direction: Direction) -> Self {
        let dir = match direction {
            Direction::Forward => FftDirection::Forward,
            Direction::Inverse => FftDirection::Inverse,
        };
        let fft = FftPlanner::new().plan_fft(len, dir);
        CyclicKernel {
            fft,
            scale: 1.0 / (len as f64).sqrt(),
        }
    }

    pub(crate) fn apply(&self, buf: &mut [Complex64]) {
        self.fft.process(buf);
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }
}

/// Unitary DFT on a cyclic domain (fast path, any size).
pub fn dft(v: &AmplitudeVector, direction: Direction) -> Result<AmplitudeVector> {
    match v.domain {
        DomainSpec::Cyclic { .. } => {
            let mut entries = v.entries.clone();
            CyclicKernel::new(entries.len(), direction).apply(&mut entries);
            Ok(AmplitudeVector {
                domain: v.domain.clone(),
                entries,
            })
        }
        DomainSpec::Product { .. } => Err(Error::DomainMismatch(
            "dft expects a cyclic domain; use dft_product".into(),
        )),
    }
}

/// Unitary DFT on a cyclic domain by direct `O(M^2)` summation.
///
/// Independent of the planned fast path; kept as a shipped cross-check.
pub fn dft_direct(v: &AmplitudeVector, direction: Direction) -> Result<AmplitudeVector> {
    let m = match v.domain {
        DomainSpec::Cyclic { modulus, .. } => modulus,
        DomainSpec::Product { .. } => {
            return Err(Error::DomainMismatch(
                "dft_direct expects a cyclic domain".into(),
            ))
        }
    };
    let roots = unit_roots(m as usize, direction);
    let scale = 1.0 / (m as f64).sqrt();
    let entries = (0..m)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, &amp) in v.entries.iter().enumerate() {
                let r = ((x as u128 * j as u128) % m as u128) as usize;
                acc += amp * roots[r];
            }
            acc * scale
        })
        .collect();
    Ok(AmplitudeVector {
        domain: v.domain.clone(),
        entries,
    })
}

/// Forward DFT on `Z_p^n` with the mod-p dot-product character
/// `e^{-2πi (x·y) / p}`, computed axis by axis.
pub fn dft_product(v: &AmplitudeVector) -> Result<AmplitudeVector> {
    dft_product_dir(v, Direction::Forward)
}

pub(crate) fn dft_product_dir(v: &AmplitudeVector, direction: Direction) -> Result<AmplitudeVector> {
    let (p, n) = match v.domain {
        DomainSpec::Product { prime, dim } => (prime as usize, dim as usize),
        DomainSpec::Cyclic { .. } => {
            return Err(Error::DomainMismatch(
                "dft_product expects a product domain".into(),
            ))
        }
    };
    let mut entries = v.entries.clone();
    product_transform_in_place(&mut entries, p, n, direction);
    Ok(AmplitudeVector {
        domain: v.domain.clone(),
        entries,
    })
}

/// Forward product DFT by direct `O(p^{2n})` summation (cross-check route).
pub fn dft_product_direct(v: &AmplitudeVector) -> Result<AmplitudeVector> {
    let p = match v.domain {
        DomainSpec::Product { prime, .. } => prime,
        DomainSpec::Cyclic { .. } => {
            return Err(Error::DomainMismatch(
                "dft_product_direct expects a product domain".into(),
            ))
        }
    };
    let size = v.domain.size();
    let roots = unit_roots(p as usize, Direction::Forward);
    let scale = 1.0 / (size as f64).sqrt();
    let coords: Vec<Vec<u64>> = (0..size)
        .map(|i| v.domain.element(i).coords().to_vec())
        .collect();
    let entries = (0..size as usize)
        .map(|y| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, &amp) in v.entries.iter().enumerate() {
                let dot: u64 = coords[x]
                    .iter()
                    .zip(&coords[y])
                    .map(|(&a, &b)| a * b % p)
                    .sum::<u64>()
                    % p;
                acc += amp * roots[dot as usize];
            }
            acc * scale
        })
        .collect();
    Ok(AmplitudeVector {
        domain: v.domain.clone(),
        entries,
    })
}

pub(crate) fn unit_roots(m: usize, direction: Direction) -> Vec<Complex64> {
    let sign = direction.sign();
    (0..m)
        .map(|r| Complex64::from_polar(1.0, sign * TAU * r as f64 / m as f64))
        .collect()
}

/// In-place unitary transform of `Z_p^n` data (axis 0 least significant).
pub(crate) fn product_transform_in_place(
    entries: &mut [Complex64],
    p: usize,
    n: usize,
    direction: Direction,
) {
    let roots = unit_roots(p, direction);
    let scale = 1.0 / (p as f64).sqrt();
    let mut fiber = vec![Complex64::new(0.0, 0.0); p];
    let mut stride = 1usize;
    for _axis in 0..n {
        let block = stride * p;
        let mut base = 0;
        while base < entries.len() {
            for off in 0..stride {
                for k in 0..p {
                    fiber[k] = entries[base + off + k * stride];
                }
                for j in 0..p {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..p {
                        acc += fiber[k] * roots[j * k % p];
                    }
                    entries[base + off + j * stride] = acc * scale;
                }
            }
            base += block;
        }
        stride = block;
    }
}

/// Frequency indices carrying more than `tol` probability.
///
/// Expects a distribution whose probabilities sum to 1 within `tol`; a
/// degenerate all-zero table yields the empty set.
pub fn spectrum_support(dist: &SpectralDistribution, tol: f64) -> Vec<usize> {
    dist.probabilities()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > tol)
        .map(|(j, _)| j)
        .collect()
}
