//! Hidden-structure functions and the oracle unitary.
//!
//! An [`OracleInstance`] is a total lookup table from a finite abelian domain
//! to label indices, constant on the cosets of a hidden subgroup (a period
//! `d` in `Z_M`, or a subspace `V` of `Z_p^n`) and, when the injective flag
//! is set, distinct across cosets. The ground truth travels inside the
//! instance but stays private: pipelines can only submit candidates through
//! the `confirm_*` scoring gates, so they provably cannot peek.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::groups::DomainSpec;
use crate::postprocess::SubspaceBasis;
use crate::spectral::{self, Direction};
use crate::{Error, Result};

/// Dense bipartite states above this entry count are rejected.
pub const MAX_BIPARTITE_ENTRIES: u64 = 1 << 20;

/// Ground truth held aside for verification and scoring only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum HiddenStructure {
    /// Minimal period `d` of a table on `Z_M` (`d` divides `M`).
    Period { d: u64 },
    /// Hidden subspace `V` of `Z_p^n` in canonical echelon form.
    Subspace { basis: SubspaceBasis },
}

/// A hidden-structure function φ as a total lookup table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    domain: DomainSpec,
    table: Vec<u32>,
    label_count: u32,
    injective: bool,
    ground_truth: HiddenStructure,
}

impl OracleInstance {
    /// Assemble an instance from raw parts (deserialization and tests).
    /// Checks table shape, not the hidden-structure claim itself — that is
    /// what [`OracleInstance::verify_hidden_structure`] is for.
    pub fn from_parts(
        domain: DomainSpec,
        table: Vec<u32>,
        label_count: u32,
        injective: bool,
        ground_truth: HiddenStructure,
    ) -> Result<Self> {
        domain.validate()?;
        if table.len() as u64 != domain.size() {
            return Err(Error::DomainMismatch(format!(
                "table has {} entries, domain has {}",
                table.len(),
                domain.size()
            )));
        }
        if let Some(&bad) = table.iter().find(|&&s| s >= label_count) {
            return Err(Error::RegisterMismatch(format!(
                "label {bad} out of range [0, {label_count})"
            )));
        }
        Ok(OracleInstance {
            domain,
            table,
            label_count,
            injective,
            ground_truth,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn label(&self, index: u64) -> u32 {
        self.table[index as usize]
    }

    pub fn label_count(&self) -> u32 {
        self.label_count
    }

    pub fn injective(&self) -> bool {
        self.injective
    }

    /// True iff the table factors through the cosets of the claimed hidden
    /// structure (and the induced injection is injective when claimed).
    pub fn verify_hidden_structure(&self) -> bool {
        match &self.ground_truth {
            HiddenStructure::Period { d } => {
                let DomainSpec::Cyclic { modulus, .. } = self.domain else {
                    return false;
                };
                let d = *d;
                if d == 0 || modulus % d != 0 {
                    return false;
                }
                let factors = (0..modulus)
                    .all(|k| self.table[k as usize] == self.table[(k % d) as usize]);
                if !factors {
                    return false;
                }
                if minimal_period_of(&self.table) != d {
                    return false;
                }
                if self.injective {
                    let mut seen = vec![false; self.label_count as usize];
                    for k in 0..d {
                        let s = self.table[k as usize] as usize;
                        if seen[s] {
                            return false;
                        }
                        seen[s] = true;
                    }
                }
                true
            }
            HiddenStructure::Subspace { basis } => {
                let DomainSpec::Product { prime, dim } = self.domain else {
                    return false;
                };
                if basis.p() != prime || basis.ambient_dim() != dim {
                    return false;
                }
                let size = self.domain.size();
                let mut rep_label = std::collections::BTreeMap::new();
                for i in 0..size {
                    let x = self.domain.element(i);
                    let Ok(rep) = basis.reduce(x.coords()) else {
                        return false;
                    };
                    let label = self.table[i as usize];
                    match rep_label.get(&rep) {
                        Some(&seen) if seen != label => return false, // not constant on coset
                        Some(_) => {}
                        None => {
                            rep_label.insert(rep, label);
                        }
                    }
                }
                if self.injective {
                    let mut labels: Vec<u32> = rep_label.values().copied().collect();
                    labels.sort_unstable();
                    labels.dedup();
                    if labels.len() != rep_label.len() {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Scoring gate: does a candidate sample period match the ground truth?
    pub fn confirm_period(&self, candidate: u64) -> bool {
        matches!(self.ground_truth, HiddenStructure::Period { d } if d == candidate)
    }

    /// Scoring gate: does a candidate frequency step `a = M/d` match?
    pub fn confirm_step(&self, candidate: u64) -> bool {
        match (&self.ground_truth, &self.domain) {
            (HiddenStructure::Period { d }, DomainSpec::Cyclic { modulus, .. }) => {
                modulus / d == candidate
            }
            _ => false,
        }
    }

    /// Scoring gate: does a candidate subspace (canonical form) match?
    pub fn confirm_subspace(&self, candidate: &SubspaceBasis) -> bool {
        matches!(&self.ground_truth, HiddenStructure::Subspace { basis } if basis == candidate)
    }

    /// Smallest `d | M` with `table(k + d) = table(k)` for all `k`.
    /// Brute-force by construction; the independent check used all over the
    /// test suites.
    pub fn minimal_period(&self) -> Result<u64> {
        match self.domain {
            DomainSpec::Cyclic { .. } => Ok(minimal_period_of(&self.table)),
            DomainSpec::Product { .. } => Err(Error::DomainMismatch(
                "minimal_period expects a cyclic domain".into(),
            )),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: OracleInstance = serde_json::from_str(s)?;
        // Re-run the shape checks that from_parts enforces.
        OracleInstance::from_parts(
            raw.domain,
            raw.table,
            raw.label_count,
            raw.injective,
            raw.ground_truth,
        )
    }
}

fn minimal_period_of(table: &[u32]) -> u64 {
    let m = table.len() as u64;
    (1..=m)
        .filter(|d| m % d == 0)
        .find(|&d| (0..m).all(|k| table[((k + d) % m) as usize] == table[k as usize]))
        .expect("m itself is always a period")
}

/// Periodic oracle on `Z_M` with sample period exactly `d`.
///
/// The table is `σ(k mod d)` for a random map σ; with `injective` set, σ is
/// a random permutation of `[0, d)`, which makes the minimal period `d`
/// automatically. Without it, σ is a random map resampled until the minimal
/// period is still exactly `d` (labels may collide).
pub fn make_periodic_oracle<R: Rng>(
    m: u64,
    d: u64,
    injective: bool,
    rng: &mut R,
) -> Result<OracleInstance> {
    if d == 0 || m == 0 || m % d != 0 {
        return Err(Error::PeriodDoesNotDivide {
            period: d,
            modulus: m,
        });
    }
    let domain = DomainSpec::cyclic(m)?;
    let sigma: Vec<u32> = if injective {
        let mut sigma: Vec<u32> = (0..d as u32).collect();
        sigma.shuffle(rng);
        sigma
    } else {
        loop {
            let sigma: Vec<u32> = (0..d).map(|_| rng.gen_range(0..d as u32)).collect();
            let table: Vec<u32> = (0..m).map(|k| sigma[(k % d) as usize]).collect();
            if minimal_period_of(&table) == d {
                break sigma;
            }
        }
    };
    let table: Vec<u32> = (0..m).map(|k| sigma[(k % d) as usize]).collect();
    OracleInstance::from_parts(
        domain,
        table,
        d as u32,
        injective,
        HiddenStructure::Period { d },
    )
}

/// Same as [`make_periodic_oracle`] but with a grid tag on the domain.
pub fn make_periodic_grid_oracle<R: Rng>(
    m: u64,
    samples_per_unit: u64,
    d: u64,
    injective: bool,
    rng: &mut R,
) -> Result<OracleInstance> {
    let oracle = make_periodic_oracle(m, d, injective, rng)?;
    let domain = DomainSpec::cyclic_grid(m, samples_per_unit)?;
    OracleInstance::from_parts(
        domain,
        oracle.table,
        oracle.label_count,
        oracle.injective,
        oracle.ground_truth,
    )
}

/// Subspace oracle on `Z_p^n`: labels constant on cosets of `V = span(basis)`
/// and distinct across cosets.
pub fn make_subspace_oracle<R: Rng>(
    p: u64,
    n: u32,
    basis: &[Vec<u64>],
    rng: &mut R,
) -> Result<OracleInstance> {
    let v = SubspaceBasis::from_independent(p, n, basis)?;
    let domain = DomainSpec::product(p, n)?;
    let size = domain.size();

    // Coset id by first appearance in index order, then a random relabeling.
    let mut rep_to_id = std::collections::HashMap::new();
    let mut coset_of = Vec::with_capacity(size as usize);
    for i in 0..size {
        let rep = v.reduce(domain.element(i).coords())?;
        let next = rep_to_id.len() as u32;
        let id = *rep_to_id.entry(rep).or_insert(next);
        coset_of.push(id);
    }
    let coset_count = rep_to_id.len() as u32;
    let mut sigma: Vec<u32> = (0..coset_count).collect();
    sigma.shuffle(rng);
    let table: Vec<u32> = coset_of.iter().map(|&c| sigma[c as usize]).collect();

    OracleInstance::from_parts(
        domain,
        table,
        coset_count,
        true,
        HiddenStructure::Subspace { basis: v },
    )
}

// ---------------------------------------------------------------------------
// Bipartite states and the oracle unitary
// ---------------------------------------------------------------------------

/// Dense amplitude table over `domain × Z_L` (argument register × value
/// register), indexed as `x * L + y`.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    domain: DomainSpec,
    label_count: u32,
    amps: Vec<Complex64>,
}

impl BipartiteState {
    /// The initial state `|0⟩|0⟩`. Fails when the dense table would exceed
    /// [`MAX_BIPARTITE_ENTRIES`].
    pub fn initial(domain: DomainSpec, label_count: u32) -> Result<Self> {
        domain.validate()?;
        if label_count == 0 {
            return Err(Error::RegisterMismatch(
                "value register needs at least one basis state".into(),
            ));
        }
        let entries = domain.size() * label_count as u64;
        if entries > MAX_BIPARTITE_ENTRIES {
            return Err(Error::StateTooLarge {
                entries,
                limit: MAX_BIPARTITE_ENTRIES,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); entries as usize];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(BipartiteState {
            domain,
            label_count,
            amps,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn label_count(&self) -> u32 {
        self.label_count
    }

    pub fn amp(&self, x: u64, y: u32) -> Complex64 {
        self.amps[(x * self.label_count as u64 + y as u64) as usize]
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn set_amp(&mut self, x: u64, y: u32, value: Complex64) {
        self.amps[(x * self.label_count as u64 + y as u64) as usize] = value;
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Probability of each argument-register outcome (value register traced
    /// out).
    pub fn left_marginal_probs(&self) -> Vec<f64> {
        let l = self.label_count as usize;
        self.amps
            .chunks_exact(l)
            .map(|block| block.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// Apply the domain Fourier transform to the argument register only.
    pub fn apply_left_transform(&mut self, direction: Direction) {
        let l = self.label_count as usize;
        let n = self.domain.size() as usize;
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        match self.domain {
            DomainSpec::Cyclic { .. } => {
                let kernel = spectral::CyclicKernel::new(n, direction);
                for y in 0..l {
                    for x in 0..n {
                        column[x] = self.amps[x * l + y];
                    }
                    kernel.apply(&mut column);
                    for x in 0..n {
                        self.amps[x * l + y] = column[x];
                    }
                }
            }
            DomainSpec::Product { prime, dim } => {
                for y in 0..l {
                    for x in 0..n {
                        column[x] = self.amps[x * l + y];
                    }
                    spectral::product_transform_in_place(
                        &mut column,
                        prime as usize,
                        dim as usize,
                        direction,
                    );
                    for x in 0..n {
                        self.amps[x * l + y] = column[x];
                    }
                }
            }
        }
    }
}

/// The oracle unitary `U_φ : |x⟩|y⟩ ↦ |x⟩|y + φ(x) mod L⟩` — a basis-state
/// permutation, realized as a block rotation of each value column.
pub fn apply_oracle_unitary(state: BipartiteState, o: &OracleInstance) -> Result<BipartiteState> {
    if state.domain != o.domain {
        return Err(Error::DomainMismatch(
            "state and oracle domains differ".into(),
        ));
    }
    if state.label_count < o.label_count {
        return Err(Error::RegisterMismatch(format!(
            "value register has {} states, oracle needs {}",
            state.label_count, o.label_count
        )));
    }
    let mut state = state;
    let l = state.label_count as usize;
    for (x, block) in state.amps.chunks_exact_mut(l).enumerate() {
        let shift = (o.table[x] as usize) % l;
        block.rotate_right(shift);
    }
    Ok(state)
}
