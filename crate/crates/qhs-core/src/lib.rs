//! Classical desk-scale simulator for quantum hidden subgroup (QHS)
//! algorithms on finite abelian groups.
//!
//! The crate simulates the standard QHS circuit — inverse Fourier transform,
//! oracle unitary, forward Fourier transform, measurement — exactly, as dense
//! linear algebra over small cyclic groups `Z_M` and products `Z_p^n`, and
//! implements the classical recovery steps that turn measurement outcomes
//! into hidden structure:
//!
//! * period finding on a discretized real window (continued-fraction
//!   recovery of a frequency `n/P`),
//! * period finding on `Z_Q` as a stand-in for the circle `R/Z` (gcd
//!   recovery of the frequency step `a`),
//! * hidden-subspace finding on `Z_p^n` (mod-p linear algebra on sampled
//!   orthogonal-complement vectors).
//!
//! Modules follow the pipeline: [`groups`] and [`spectral`] provide domains
//! and transforms, [`oracle`] builds hidden-structure functions, [`simulator`]
//! produces measurement distributions and samples, [`postprocess`] recovers
//! structure, [`algorithms`] wires end-to-end trials, and [`harness`] runs
//! reproducible batches behind a config file.

pub mod algorithms;
pub mod groups;
pub mod harness;
pub mod oracle;
pub mod postprocess;
pub mod simulator;
pub mod spectral;
pub mod tolerances;

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid rational: {0}")]
    InvalidRational(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("period must divide domain size ({period} does not divide {modulus})")]
    PeriodDoesNotDivide { period: u64, modulus: u64 },

    #[error("basis vectors are dependent mod {p}")]
    DependentBasis { p: u64 },

    #[error("value register mismatch: {0}")]
    RegisterMismatch(String),

    #[error(
        "bipartite state too large ({entries} entries > {limit}); \
         use the grouped left-marginal path instead"
    )]
    StateTooLarge { entries: u64, limit: u64 },

    #[error("domain has no grid tag; binning needs a samples-per-unit rate")]
    MissingGrid,

    #[error("sample out of range: {0}")]
    SampleOutOfRange(String),

    #[error("config error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Single-message config error.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub use groups::{DomainSpec, GroupElement, Rational};
pub use oracle::{HiddenStructure, OracleInstance};
pub use postprocess::{ContinuedFraction, SubspaceBasis};
pub use simulator::{BinnedOutcome, SpectralDistribution};
