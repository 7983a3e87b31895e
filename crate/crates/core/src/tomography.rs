//! Pauli-basis state tomography of the data register.
//!
//! Every qubit is measured in X, Y or Z, giving `3^n` settings. Pauli
//! expectations are pooled over all settings compatible with a Pauli string,
//! inverted linearly, and the result is projected onto the nearest physical
//! state (eigenvalue projection onto the probability simplex).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::noise::{apply_readout, ConfusionMatrix, NoiseModel};
use crate::quantum::matrix::{from_eigen, hermitian_eigen, psd_sqrt};
use crate::quantum::{gates, tol, CMatrix, DensityMatrix, ONE};
use crate::simulator::{derive_seed, final_density_matrix, sample_counts, CountsDistribution};

/// Largest data register `run_qst` accepts.
pub const MAX_QST_QUBITS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::X, PauliBasis::Y, PauliBasis::Z];

    fn letter(self) -> char {
        match self {
            PauliBasis::X => 'X',
            PauliBasis::Y => 'Y',
            PauliBasis::Z => 'Z',
        }
    }

    /// Index in the I, X, Y, Z Pauli labelling.
    fn pauli_index(self) -> usize {
        match self {
            PauliBasis::X => 1,
            PauliBasis::Y => 2,
            PauliBasis::Z => 3,
        }
    }
}

/// One tomography setting: a basis for every data qubit, qubit 0 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SettingRepr", into = "SettingRepr")]
pub struct MeasurementSetting {
    bases: Vec<PauliBasis>,
    shots_assigned: u64,
}

#[derive(Serialize, Deserialize)]
struct SettingRepr {
    bases: String,
    shots_assigned: u64,
}

impl TryFrom<SettingRepr> for MeasurementSetting {
    type Error = Error;
    fn try_from(r: SettingRepr) -> Result<Self> {
        MeasurementSetting::new(&r.bases, r.shots_assigned)
    }
}

impl From<MeasurementSetting> for SettingRepr {
    fn from(s: MeasurementSetting) -> Self {
        SettingRepr {
            bases: s.label(),
            shots_assigned: s.shots_assigned,
        }
    }
}

impl MeasurementSetting {
    pub fn new(bases: &str, shots_assigned: u64) -> Result<Self> {
        let bases = bases
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'X' => Ok(PauliBasis::X),
                'Y' => Ok(PauliBasis::Y),
                'Z' => Ok(PauliBasis::Z),
                _ => Err(Error::InvalidConfig(format!("unknown basis {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bases.is_empty() {
            return Err(Error::InvalidConfig("setting needs at least one basis".into()));
        }
        Ok(Self { bases, shots_assigned })
    }

    pub fn bases(&self) -> &[PauliBasis] {
        &self.bases
    }

    pub fn num_qubits(&self) -> usize {
        self.bases.len()
    }

    pub fn shots_assigned(&self) -> u64 {
        self.shots_assigned
    }

    pub fn label(&self) -> String {
        self.bases.iter().map(|b| b.letter()).collect()
    }

    /// Position of this setting in the X < Y < Z lexicographic order.
    fn ordinal(&self) -> usize {
        self.bases.iter().fold(0, |acc, b| acc * 3 + (b.pauli_index() - 1))
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for MeasurementSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::new(s, 0)
    }
}

/// All `3^n` settings in lexicographic order; shots split evenly with the
/// remainder going to the earliest settings.
pub fn generate_settings(n: usize, total_shots: u64) -> Result<Vec<MeasurementSetting>> {
    if n == 0 {
        return Err(Error::InvalidConfig("tomography needs at least one qubit".into()));
    }
    if n > 12 {
        return Err(Error::RegisterTooLarge { qubits: n, limit: 12 });
    }
    let count = 3usize.pow(n as u32);
    if total_shots < count as u64 {
        return Err(Error::InsufficientShots {
            shots: total_shots,
            settings: count,
        });
    }
    let base = total_shots / count as u64;
    let extra = (total_shots % count as u64) as usize;
    Ok((0..count)
        .map(|k| {
            let mut bases = vec![PauliBasis::X; n];
            let mut r = k;
            for slot in bases.iter_mut().rev() {
                *slot = PauliBasis::ALL[r % 3];
                r /= 3;
            }
            MeasurementSetting {
                bases,
                shots_assigned: base + u64::from(k < extra),
            }
        })
        .collect())
}

/// Rotates ρ so that a Z measurement realises `setting`: H for X, S† then H for Y.
fn rotate_into_basis(rho: &DensityMatrix, setting: &MeasurementSetting) -> Result<DensityMatrix> {
    if setting.num_qubits() != rho.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.num_qubits(),
            actual: setting.num_qubits(),
        });
    }
    let mut out = rho.clone();
    let h = gates::h();
    let y_change = h.compose(&gates::sdg());
    for (q, b) in setting.bases.iter().enumerate() {
        match b {
            PauliBasis::X => out.apply_unitary(&h, &[q])?,
            PauliBasis::Y => out.apply_unitary(&y_change, &[q])?,
            PauliBasis::Z => {}
        }
    }
    Ok(out)
}

/// Exact outcome distribution for `setting`, optionally pushed through readout confusion.
pub fn setting_probabilities(
    rho: &DensityMatrix,
    setting: &MeasurementSetting,
    readout: Option<&[ConfusionMatrix]>,
) -> Result<Vec<f64>> {
    let p = rotate_into_basis(rho, setting)?.probabilities();
    Ok(match readout {
        Some(r) => apply_readout(&p, r),
        None => p,
    })
}

pub fn measure_in_basis(rho: &DensityMatrix, setting: &MeasurementSetting, seed: u64) -> Result<CountsDistribution> {
    measure_with_readout(rho, setting, None, seed)
}

pub fn measure_with_readout(
    rho: &DensityMatrix,
    setting: &MeasurementSetting,
    readout: Option<&[ConfusionMatrix]>,
    seed: u64,
) -> Result<CountsDistribution> {
    if setting.shots_assigned == 0 {
        return Err(Error::InsufficientShots {
            shots: 0,
            settings: 1,
        });
    }
    let p = setting_probabilities(rho, setting, readout)?;
    sample_counts(&p, rho.num_qubits(), setting.shots_assigned, seed)
}

/// Pauli string `P` (base-4 digits, qubit 0 most significant; 0=I 1=X 2=Y 3=Z)
/// as a monomial matrix: for each column j, the row index and the entry.
fn pauli_columns(code: usize, n: usize) -> Vec<(usize, Complex64)> {
    let mut xmask = 0usize;
    let digits: Vec<usize> = (0..n).map(|q| (code >> (2 * (n - 1 - q))) & 3).collect();
    for (q, &d) in digits.iter().enumerate() {
        if d == 1 || d == 2 {
            xmask |= 1 << (n - 1 - q);
        }
    }
    (0..1usize << n)
        .map(|j| {
            let mut phase = ONE;
            for (q, &d) in digits.iter().enumerate() {
                let bit = (j >> (n - 1 - q)) & 1;
                phase *= match (d, bit) {
                    (2, 0) => Complex64::new(0.0, 1.0),
                    (2, _) => Complex64::new(0.0, -1.0),
                    (3, 1) => -ONE,
                    _ => ONE,
                };
            }
            (j ^ xmask, phase)
        })
        .collect()
}

/// `ρ = 2^-n Σ_P ⟨P⟩ P`; `expectations` indexed by Pauli code (see [`pauli_expectations`]).
pub fn rho_from_pauli_expectations(n: usize, expectations: &[f64]) -> Result<CMatrix> {
    if expectations.len() != 1 << (2 * n) {
        return Err(Error::DimensionMismatch {
            expected: 1 << (2 * n),
            actual: expectations.len(),
        });
    }
    let d = 1usize << n;
    let mut rho = CMatrix::zeros(d);
    let norm = 1.0 / d as f64;
    for (code, &e) in expectations.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        for (j, (row, phase)) in pauli_columns(code, n).into_iter().enumerate() {
            rho[(row, j)] += phase * (e * norm);
        }
    }
    Ok(rho)
}

/// Exact `Tr(Pρ)` for every Pauli string, indexed by base-4 code with qubit 0
/// as the most significant digit.
pub fn pauli_expectations(rho: &CMatrix) -> Vec<f64> {
    let n = rho.dim().trailing_zeros() as usize;
    (0..1usize << (2 * n))
        .map(|code| {
            // Tr(Pρ) = Σ_j P[row_j, j] ρ[j, row_j]
            pauli_columns(code, n)
                .into_iter()
                .enumerate()
                .map(|(j, (row, phase))| phase * rho[(j, row)])
                .sum::<Complex64>()
                .re
        })
        .collect()
}

/// Linear-inversion estimate from finite-shot data. Each Pauli expectation is
/// pooled over every setting that measures its non-identity positions in the
/// right basis, weighting each setting by its shots.
pub fn linear_inversion(data: &[(MeasurementSetting, CountsDistribution)]) -> Result<CMatrix> {
    let n = data
        .first()
        .map(|(s, _)| s.num_qubits())
        .ok_or_else(|| Error::MissingSetting("no tomography data".into()))?;
    let expected = 3usize.pow(n as u32);
    let mut seen = vec![false; expected];
    for (s, c) in data {
        if s.num_qubits() != n || c.n_bits() != n {
            return Err(Error::Ragged(format!("setting {s} does not have {n} qubits")));
        }
        seen[s.ordinal()] = true;
    }
    if let Some(missing) = seen.iter().position(|&x| !x) {
        let label = generate_settings(n, expected as u64)?[missing].label();
        return Err(Error::MissingSetting(label));
    }
    let paulis = 1usize << (2 * n);
    let mut signed = vec![0.0f64; paulis];
    let mut weight = vec![0.0f64; paulis];
    for (s, counts) in data {
        let probs: Vec<(usize, f64)> = counts
            .counts()
            .iter()
            .map(|(k, &v)| (usize::from_str_radix(k, 2).expect("bitstring"), v as f64))
            .collect();
        let shots = counts.total() as f64;
        for mask in 0..1usize << n {
            let mut code = 0usize;
            for q in 0..n {
                code <<= 2;
                if mask >> (n - 1 - q) & 1 == 1 {
                    code |= s.bases[q].pauli_index();
                }
            }
            let sum: f64 = probs
                .iter()
                .map(|&(o, c)| if (o & mask).count_ones() % 2 == 0 { c } else { -c })
                .sum();
            signed[code] += sum;
            weight[code] += shots;
        }
    }
    let expectations: Vec<f64> = signed.iter().zip(&weight).map(|(s, w)| s / w).collect();
    rho_from_pauli_expectations(n, &expectations)
}

/// Euclidean projection of a real vector onto the probability simplex.
fn project_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Nearest (Frobenius) density matrix to a Hermitian estimate.
pub fn project_to_physical(rho_raw: &CMatrix) -> Result<DensityMatrix> {
    let asymmetry = rho_raw.hermitian_asymmetry();
    if asymmetry > tol::PSD {
        return Err(Error::NotHermitian { asymmetry });
    }
    if !rho_raw.is_finite() {
        return Err(Error::Unphysical("non-finite entry".into()));
    }
    let herm = rho_raw.add(&rho_raw.adjoint()).scale(Complex64::new(0.5, 0.0));
    let (values, vecs) = hermitian_eigen(&herm);
    let projected = project_simplex(&values);
    DensityMatrix::from_matrix(from_eigen(&projected, &vecs))
}

/// Square-root fidelity `Tr√(√σ ρ √σ)`, which is `√Tr(σρ)` when either
/// state is pure.
pub fn state_fidelity(sigma: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    if sigma.num_qubits() != rho.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: sigma.num_qubits(),
            actual: rho.num_qubits(),
        });
    }
    let overlap = |a: &DensityMatrix, b: &DensityMatrix| -> f64 {
        a.matrix()
            .as_slice()
            .iter()
            .zip(b.matrix().as_slice())
            .map(|(x, y)| x * y.conj())
            .sum::<Complex64>()
            .re
    };
    if (sigma.purity() - 1.0).abs() < tol::CHANNEL || (rho.purity() - 1.0).abs() < tol::CHANNEL {
        return Ok(overlap(sigma, rho).max(0.0).sqrt());
    }
    let root = psd_sqrt(sigma.matrix());
    let inner = root.matmul(rho.matrix()).matmul(&root);
    let inner = inner.add(&inner.adjoint()).scale(Complex64::new(0.5, 0.0));
    let (values, _) = hermitian_eigen(&inner);
    Ok(values.iter().map(|v| v.max(0.0).sqrt()).sum())
}

#[derive(Clone, Debug)]
pub struct TomographyResult {
    pub rho_raw: CMatrix,
    pub rho_physical: DensityMatrix,
    pub fidelity: f64,
    pub total_shots: u64,
    pub settings: usize,
}

#[derive(Serialize, Deserialize)]
struct TomographyRepr {
    num_qubits: usize,
    total_shots: u64,
    settings: usize,
    fidelity: f64,
    rho_raw: Vec<[f64; 2]>,
    rho_physical: Vec<[f64; 2]>,
}

fn flatten(m: &CMatrix) -> Vec<[f64; 2]> {
    m.as_slice().iter().map(|z| [z.re, z.im]).collect()
}

fn unflatten(pairs: &[[f64; 2]]) -> Result<CMatrix> {
    let dim = pairs.len().isqrt();
    CMatrix::from_vec(dim, pairs.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
}

impl TomographyResult {
    pub fn num_qubits(&self) -> usize {
        self.rho_physical.num_qubits()
    }

    pub fn to_json(&self) -> String {
        let repr = TomographyRepr {
            num_qubits: self.num_qubits(),
            total_shots: self.total_shots,
            settings: self.settings,
            fidelity: self.fidelity,
            rho_raw: flatten(&self.rho_raw),
            rho_physical: flatten(self.rho_physical.matrix()),
        };
        serde_json::to_string(&repr).expect("tomography serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: TomographyRepr = serde_json::from_str(text)?;
        let rho_raw = unflatten(&r.rho_raw)?;
        let rho_physical = DensityMatrix::from_matrix(unflatten(&r.rho_physical)?)?;
        if rho_physical.num_qubits() != r.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: r.num_qubits,
                actual: rho_physical.num_qubits(),
            });
        }
        Ok(Self {
            rho_raw,
            rho_physical,
            fidelity: r.fidelity,
            total_shots: r.total_shots,
            settings: r.settings,
        })
    }
}

/// Simulated tomography of the data register of `c`: prepare (with noise if
/// given), measure every setting with its own derived seed, reconstruct and
/// compare against the noiseless data-register state.
pub fn run_qst(c: &Circuit, model: Option<&NoiseModel>, total_shots: u64, seed: u64) -> Result<TomographyResult> {
    let n = c.num_data_qubits();
    if n > MAX_QST_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: n,
            limit: MAX_QST_QUBITS,
        });
    }
    let prepared = c.without_measurements();
    let target = final_density_matrix(&prepared, None)?;
    let rho = match model {
        Some(_) => final_density_matrix(&prepared, model)?,
        None => target.clone(),
    };
    let readout = match model {
        Some(m) => Some(m.readout_for(&c.data_qubits())?),
        None => None,
    };
    let settings = generate_settings(n, total_shots)?;
    let data: Vec<(MeasurementSetting, CountsDistribution)> = settings
        .par_iter()
        .map(|s| {
            let counts = measure_with_readout(&rho, s, readout.as_deref(), derive_seed(seed, &format!("qst:{s}")))?;
            Ok((s.clone(), counts))
        })
        .collect::<Result<_>>()?;
    let rho_raw = linear_inversion(&data)?;
    let rho_physical = project_to_physical(&rho_raw)?;
    let fidelity = state_fidelity(&target, &rho_physical)?;
    Ok(TomographyResult {
        rho_raw,
        rho_physical,
        fidelity,
        total_shots,
        settings: settings.len(),
    })
}

/// Largest absolute eigenvalue deficit below zero; 0 for PSD input.
pub fn negativity(m: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(m);
    (-values[0]).max(0.0)
}

/// Trace distance `½‖A − B‖₁` of Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = a.sub(b);
    let (values, _) = hermitian_eigen(&diff);
    values.iter().map(|v| v.abs()).sum::<f64>() / 2.0
}

/// |ψ⟩⟨ψ| for a computational basis state given as a bitstring.
pub fn basis_projector(bits: &str) -> Result<DensityMatrix> {
    let idx = crate::quantum::bitstring_to_index(bits)
        .ok_or_else(|| Error::InvalidSecret(bits.to_string()))?;
    let d = 1usize << bits.len();
    let mut m = CMatrix::zeros(d);
    m[(idx, idx)] = ONE;
    DensityMatrix::from_matrix(m)
}
