//! Ideal state-vector and noisy density-matrix execution with seeded sampling.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::noise::{apply_readout, NoiseModel};
use crate::quantum::{index_to_bitstring, DensityMatrix, StateVector, Superoperator, MAX_DENSITY_QUBITS};

/// Shots per scenario when the caller does not choose.
pub const DEFAULT_SHOTS: u64 = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    IdealStatevector,
    NoisyDensity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionConfig {
    shots: u64,
    seed: u64,
    mode: Mode,
}

impl ExecutionConfig {
    pub fn new(shots: u64, seed: u64, mode: Mode) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidConfig("shots must be at least 1".into()));
        }
        Ok(Self { shots, seed, mode })
    }

    pub fn ideal(shots: u64, seed: u64) -> Result<Self> {
        Self::new(shots, seed, Mode::IdealStatevector)
    }

    pub fn noisy(shots: u64, seed: u64) -> Result<Self> {
        Self::new(shots, seed, Mode::NoisyDensity)
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Outcome counts for one experiment. Keys are `n_bits`-long strings with the
/// first measured qubit first; zero counts are not stored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CountsRepr", into = "CountsRepr")]
pub struct CountsDistribution {
    n_bits: usize,
    counts: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct CountsRepr {
    n_bits: usize,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl TryFrom<CountsRepr> for CountsDistribution {
    type Error = Error;

    fn try_from(r: CountsRepr) -> Result<Self> {
        let c = CountsDistribution::new(r.n_bits, r.counts)?;
        if c.total() != r.shots {
            return Err(Error::InvalidCounts(format!(
                "counts sum to {} but shots = {}",
                c.total(),
                r.shots
            )));
        }
        Ok(c)
    }
}

impl From<CountsDistribution> for CountsRepr {
    fn from(c: CountsDistribution) -> Self {
        CountsRepr {
            n_bits: c.n_bits,
            shots: c.total(),
            counts: c.counts,
        }
    }
}

impl CountsDistribution {
    pub fn new(n_bits: usize, counts: BTreeMap<String, u64>) -> Result<Self> {
        if n_bits == 0 {
            return Err(Error::InvalidCounts("n_bits must be at least 1".into()));
        }
        for key in counts.keys() {
            if key.len() != n_bits || !key.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(Error::InvalidCounts(format!(
                    "outcome {key:?} is not a {n_bits}-bit string"
                )));
            }
        }
        let counts: BTreeMap<String, u64> = counts.into_iter().filter(|(_, v)| *v > 0).collect();
        if counts.is_empty() {
            return Err(Error::InvalidCounts("no shots recorded".into()));
        }
        Ok(Self { n_bits, counts })
    }

    /// From counts indexed by outcome (index bit order as in [`index_to_bitstring`]).
    pub fn from_indexed(n_bits: usize, counts: &[u64]) -> Result<Self> {
        if counts.len() != 1 << n_bits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_bits,
                actual: counts.len(),
            });
        }
        let map = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (index_to_bitstring(i, n_bits), c))
            .collect();
        Self::new(n_bits, map)
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn get(&self, outcome: &str) -> u64 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }

    pub fn frequency(&self, outcome: &str) -> f64 {
        self.get(outcome) as f64 / self.total() as f64
    }

    /// Empirical distribution over all `2^n_bits` outcomes.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        let mut p = vec![0.0; 1 << self.n_bits];
        for (k, &v) in &self.counts {
            let idx = usize::from_str_radix(k, 2).expect("validated bitstring");
            p[idx] = v as f64 / total;
        }
        p
    }

    /// Highest count; ties go to the lexicographically smallest outcome.
    pub fn most_frequent(&self) -> (&str, u64) {
        let mut best: Option<(&str, u64)> = None;
        for (k, &v) in &self.counts {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.expect("non-empty counts")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("counts serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Stable per-job seed: the first 8 bytes of SHA-256(base ‖ tag).
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Snaps probabilities to a 2^-40 grid so that results differing only by
/// round-off sample identically.
fn clean_probabilities(probs: &[f64]) -> Result<Vec<f64>> {
    const GRID: f64 = (1u64 << 40) as f64;
    if probs.iter().any(|p| !p.is_finite() || *p < -1e-9) {
        return Err(Error::InvalidConfig("distribution has invalid entries".into()));
    }
    let snapped: Vec<f64> = probs.iter().map(|p| (p.max(0.0) * GRID).round() / GRID).collect();
    let sum: f64 = snapped.iter().sum();
    if sum.is_nan() || sum <= 0.0 {
        return Err(Error::InvalidConfig("distribution has zero mass".into()));
    }
    Ok(snapped.into_iter().map(|p| p / sum).collect())
}

/// One multinomial draw of `shots` outcomes (conditional-binomial chain).
pub fn sample_counts(probs: &[f64], n_bits: usize, shots: u64, seed: u64) -> Result<CountsDistribution> {
    if shots == 0 {
        return Err(Error::InvalidConfig("shots must be at least 1".into()));
    }
    if probs.len() != 1 << n_bits {
        return Err(Error::DimensionMismatch {
            expected: 1 << n_bits,
            actual: probs.len(),
        });
    }
    let p = clean_probabilities(probs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = p.iter().rposition(|&x| x > 0.0).expect("positive mass");
    let mut counts = vec![0u64; p.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if pi == 0.0 {
            continue;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        let ratio = (pi / mass).clamp(0.0, 1.0);
        let k = if ratio >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, ratio)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?
                .sample(&mut rng)
        };
        counts[i] = k;
        remaining -= k;
        mass -= pi;
    }
    CountsDistribution::from_indexed(n_bits, &counts)
}

/// Marginal of a full-register distribution on `qubits`, `qubits[0]` as the
/// high-order bit of the result.
fn marginal(full: &[f64], num_qubits: usize, qubits: &[usize]) -> Vec<f64> {
    let k = qubits.len();
    if k == num_qubits && qubits.iter().enumerate().all(|(i, &q)| i == q) {
        return full.to_vec();
    }
    let mut out = vec![0.0; 1 << k];
    for (idx, &p) in full.iter().enumerate() {
        let mut o = 0usize;
        for &q in qubits {
            o = (o << 1) | ((idx >> (num_qubits - 1 - q)) & 1);
        }
        out[o] += p;
    }
    out
}

fn to_map(probs: &[f64], width: usize) -> BTreeMap<String, f64> {
    probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (index_to_bitstring(i, width), p))
        .collect()
}

/// Final state of the unitary part of `c` from |0…0⟩.
pub fn final_statevector(c: &Circuit) -> Result<StateVector> {
    let mut psi = StateVector::zero(c.num_qubits())?;
    for g in c.unitary_gates() {
        let u = g.kind().unitary().expect("unitary gate");
        psi.apply(&u, g.targets())?;
    }
    Ok(psi)
}

/// Exact outcome probabilities of the measured qubits, indexed by outcome.
pub fn ideal_probabilities(c: &Circuit) -> Result<Vec<f64>> {
    let psi = final_statevector(c)?;
    Ok(marginal(&psi.probabilities(), c.num_qubits(), &c.measured_qubits()))
}

/// Exact noiseless distribution over measured-qubit outcomes (zero entries omitted).
pub fn exact_distribution(c: &Circuit) -> Result<BTreeMap<String, f64>> {
    Ok(to_map(&ideal_probabilities(c)?, c.measured_qubits().len()))
}

pub fn run_ideal(c: &Circuit, cfg: &ExecutionConfig) -> Result<CountsDistribution> {
    if cfg.mode != Mode::IdealStatevector {
        return Err(Error::InvalidConfig("run_ideal needs mode ideal_statevector".into()));
    }
    let probs = ideal_probabilities(c)?;
    sample_counts(&probs, c.measured_qubits().len(), cfg.shots, cfg.seed)
}

/// Density-matrix evolution of the whole register. Each gate is fused with
/// the noise channels on its own qubits into one superoperator pass; channels
/// on other qubits (idle decay) follow separately.
pub fn evolve_density(c: &Circuit, model: Option<&NoiseModel>) -> Result<DensityMatrix> {
    let n = c.num_qubits();
    if n > MAX_DENSITY_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: n,
            limit: MAX_DENSITY_QUBITS,
        });
    }
    if let Some(m) = model {
        m.check_covers(c)?;
    }
    let mut rho = DensityMatrix::zero(n)?;
    for g in c.unitary_gates() {
        let u = g.kind().unitary().expect("unitary gate");
        let channels = match model {
            Some(m) => m.channels_for(g)?,
            None => Vec::new(),
        };
        if channels.is_empty() {
            rho.apply_unitary(&u, g.targets())?;
            continue;
        }
        let targets = g.targets();
        let mut fused = Superoperator::from_unitary(&u);
        let mut rest = Vec::new();
        for ch in channels {
            let positions: Option<Vec<usize>> = ch
                .qubits
                .iter()
                .map(|q| targets.iter().position(|t| t == q))
                .collect();
            match positions {
                Some(pos) => {
                    let s = Superoperator::from_channel(&ch.channel).embed(&pos, targets.len())?;
                    fused = fused.then(&s)?;
                }
                None => rest.push(ch),
            }
        }
        rho.apply_superoperator(&fused, targets)?;
        for ch in rest {
            rho.apply_channel(&ch.channel, &ch.qubits)?;
        }
    }
    Ok(rho)
}

/// Reduced state of the data register after the unitary part of `c`
/// (ancilla traced out; measurements ignored).
pub fn final_density_matrix(c: &Circuit, model: Option<&NoiseModel>) -> Result<DensityMatrix> {
    let rho = evolve_density(c, model)?;
    if c.has_ancilla() {
        rho.partial_trace(&c.data_qubits())
    } else {
        Ok(rho)
    }
}

/// Measured-qubit outcome probabilities under `model`, readout error included.
pub fn noisy_probabilities(c: &Circuit, model: &NoiseModel) -> Result<Vec<f64>> {
    let rho = evolve_density(c, Some(model))?;
    let measured = c.measured_qubits();
    let p = marginal(&rho.probabilities(), c.num_qubits(), &measured);
    Ok(apply_readout(&p, &model.readout_for(&measured)?))
}

pub fn run_noisy(c: &Circuit, model: &NoiseModel, cfg: &ExecutionConfig) -> Result<CountsDistribution> {
    if cfg.mode != Mode::NoisyDensity {
        return Err(Error::InvalidConfig("run_noisy needs mode noisy_density".into()));
    }
    let probs = noisy_probabilities(c, model)?;
    sample_counts(&probs, c.measured_qubits().len(), cfg.shots, cfg.seed)
}

/// Dispatches on `cfg.mode`; `model` is required for noisy runs.
pub fn run(c: &Circuit, model: Option<&NoiseModel>, cfg: &ExecutionConfig) -> Result<CountsDistribution> {
    match (cfg.mode, model) {
        (Mode::IdealStatevector, _) => run_ideal(c, cfg),
        (Mode::NoisyDensity, Some(m)) => run_noisy(c, m, cfg),
        (Mode::NoisyDensity, None) => Err(Error::InvalidConfig("noisy run without a noise model".into())),
    }
}
