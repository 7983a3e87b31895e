//! Dense complex linear algebra for small registers: state vectors, density
//! matrices, unitaries and Kraus channels.
//!
//! Basis index `i` of an `m`-qubit register stores qubit 0 in its most
//! significant bit, so the bitstring printed for index `i` reads qubit 0 first.

mod local;
pub mod matrix;

use num_complex::Complex64;

pub use matrix::{CMatrix, I, ONE, ZERO};

use crate::error::{Error, Result};
use local::validate_targets;

/// Numerical tolerances shared across the crate.
pub mod tol {
    /// Unitary evolution paths.
    pub const UNITARY: f64 = 1e-10;
    /// Channel (density-matrix) paths.
    pub const CHANNEL: f64 = 1e-9;
    /// Allowed negative eigenvalue of a physical state.
    pub const PSD: f64 = 1e-8;
}

/// Largest register any simulation path accepts.
pub const MAX_QUBITS: usize = 16;

/// Largest register for density-matrix paths (4^12 entries is 256 MiB).
pub const MAX_DENSITY_QUBITS: usize = 12;

fn dim_to_qubits(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Formats basis index `index` of a `width`-bit register, qubit 0 first.
pub fn index_to_bitstring(index: usize, width: usize) -> String {
    (0..width)
        .map(|q| if index >> (width - 1 - q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn bitstring_to_index(bits: &str) -> Option<usize> {
    bits.chars().try_fold(0usize, |acc, c| match c {
        '0' => Some(acc << 1),
        '1' => Some((acc << 1) | 1),
        _ => None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unitary {
    m: CMatrix,
}

impl Unitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        dim_to_qubits(m.dim())?;
        if !m.is_finite() {
            return Err(Error::NotUnitary { deviation: f64::NAN });
        }
        let deviation = m.adjoint().matmul(&m).max_abs_diff(&CMatrix::identity(m.dim()));
        if deviation > tol::UNITARY {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { m })
    }

    /// Skips the O(d^3) unitarity check; callers build the matrix from unitary factors.
    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        debug_assert!(m.dim().is_power_of_two());
        Self { m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn num_qubits(&self) -> usize {
        self.m.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    /// `self · rhs`: `rhs` acts first.
    pub fn compose(&self, rhs: &Unitary) -> Self {
        Self {
            m: self.m.matmul(&rhs.m),
        }
    }

    pub fn scale_phase(&self, phase: Complex64) -> Self {
        Self {
            m: self.m.scale(phase),
        }
    }

    /// Returns `(phase, deviation)` such that `self ≈ phase · other`, where the
    /// phase is estimated from the largest element of `other`.
    pub fn phase_alignment(&self, other: &Unitary) -> (Complex64, f64) {
        let (idx, _) = other
            .m
            .as_slice()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("non-empty matrix");
        let ratio = self.m.as_slice()[idx] / other.m.as_slice()[idx];
        let phase = ratio / ratio.norm();
        let deviation = self.m.max_abs_diff(&other.m.scale(phase));
        (phase, deviation)
    }
}

/// `m <- U m` with U acting on `targets` of an `num_qubits` register.
pub(crate) fn left_multiply(m: &mut CMatrix, num_qubits: usize, u: &Unitary, targets: &[usize]) {
    local::apply_left(m, num_qubits, &u.m, targets);
}

pub fn kron(a: &Unitary, b: &Unitary) -> Unitary {
    Unitary { m: a.m.kron(&b.m) }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0⟩
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::InvalidConfig("register needs at least one qubit".into()));
        }
        if num_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge {
                qubits: num_qubits,
                limit: MAX_QUBITS,
            });
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: index,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { num_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let num_qubits = dim_to_qubits(amps.len())?;
        if num_qubits == 0 {
            return Err(Error::InvalidConfig("register needs at least one qubit".into()));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidConfig("non-finite amplitude".into()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > tol::UNITARY {
            return Err(Error::InvalidConfig(format!("state norm {norm} is not 1")));
        }
        Ok(Self { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// In-place unitary application on `targets`.
    pub fn apply(&mut self, u: &Unitary, targets: &[usize]) -> Result<()> {
        validate_targets(self.num_qubits, targets)?;
        let expected = 1usize << targets.len();
        if u.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: u.dim(),
            });
        }
        local::apply_to_vector(&mut self.amps, self.num_qubits, &u.m, targets);
        Ok(())
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            num_qubits: self.num_qubits,
            m: CMatrix::outer(&self.amps),
        }
    }
}

pub fn apply_unitary(state: &StateVector, u: &Unitary, targets: &[usize]) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(u, targets)?;
    Ok(out)
}

/// Completely positive trace-preserving map given by Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    operators: Vec<CMatrix>,
    superop: CMatrix,
}

impl KrausChannel {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidConfig("channel needs at least one Kraus operator".into()))?;
        let d = first.dim();
        dim_to_qubits(d)?;
        let mut completeness = CMatrix::zeros(d);
        for k in &operators {
            if k.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: k.dim(),
                });
            }
            if !k.is_finite() {
                return Err(Error::NotTracePreserving { deviation: f64::NAN });
            }
            completeness = completeness.add(&k.adjoint().matmul(k));
        }
        let deviation = completeness.max_abs_diff(&CMatrix::identity(d));
        if deviation > tol::CHANNEL {
            return Err(Error::NotTracePreserving { deviation });
        }
        let superop = operators
            .iter()
            .map(|k| k.kron(&conjugate(k)))
            .reduce(|a, b| a.add(&b))
            .expect("non-empty");
        Ok(Self { operators, superop })
    }

    pub fn identity(num_qubits: usize) -> Self {
        Self::new(vec![CMatrix::identity(1 << num_qubits)]).expect("identity is trace preserving")
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn dim(&self) -> usize {
        self.superop.dim().isqrt()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    /// Row-major Liouville representation `Σ K ⊗ K̄`.
    pub fn superoperator(&self) -> &CMatrix {
        &self.superop
    }

    /// Sequential composition: `self` is applied after `first`.
    pub fn after(&self, first: &KrausChannel) -> Result<Self> {
        if self.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: first.dim(),
            });
        }
        let ops = self
            .operators
            .iter()
            .flat_map(|a| first.operators.iter().map(move |b| a.matmul(b)))
            .collect();
        Self::new(ops)
    }

    /// Independent parallel action; `self` on the high-order qubits.
    pub fn tensor(&self, rhs: &KrausChannel) -> Result<Self> {
        let ops = self
            .operators
            .iter()
            .flat_map(|a| rhs.operators.iter().map(move |b| a.kron(b)))
            .collect();
        Self::new(ops)
    }
}

/// Linear map on a few qubits in row-major Liouville form. Used to fuse a
/// gate with the channels that follow it into a single pass over ρ.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    num_qubits: usize,
    m: CMatrix,
}

impl Superoperator {
    pub fn identity(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            m: CMatrix::identity(1 << (2 * num_qubits)),
        }
    }

    pub fn from_unitary(u: &Unitary) -> Self {
        Self {
            num_qubits: u.num_qubits(),
            m: u.m.kron(&conjugate(&u.m)),
        }
    }

    pub fn from_channel(ch: &KrausChannel) -> Self {
        Self {
            num_qubits: ch.num_qubits(),
            m: ch.superop.clone(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Lifts `self` to a `num_qubits`-qubit space where it acts on `positions`.
    pub fn embed(&self, positions: &[usize], num_qubits: usize) -> Result<Self> {
        validate_targets(num_qubits, positions)?;
        if positions.len() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                actual: positions.len(),
            });
        }
        let d = 1usize << num_qubits;
        let mut out = CMatrix::zeros(d * d);
        for col in 0..d * d {
            let mut basis = CMatrix::zeros(d);
            basis.as_mut_slice()[col] = ONE;
            local::apply_superoperator(&mut basis, num_qubits, &self.m, positions);
            for (row, &v) in basis.as_slice().iter().enumerate() {
                out[(row, col)] = v;
            }
        }
        Ok(Self { num_qubits, m: out })
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &Superoperator) -> Result<Self> {
        if self.num_qubits != next.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                actual: next.num_qubits,
            });
        }
        Ok(Self {
            num_qubits: self.num_qubits,
            m: next.m.matmul(&self.m),
        })
    }
}

fn conjugate(m: &CMatrix) -> CMatrix {
    CMatrix::from_vec(m.dim(), m.as_slice().iter().map(|x| x.conj()).collect())
        .expect("same shape")
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    m: CMatrix,
}

impl DensityMatrix {
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits > MAX_DENSITY_QUBITS {
            return Err(Error::RegisterTooLarge {
                qubits: num_qubits,
                limit: MAX_DENSITY_QUBITS,
            });
        }
        Ok(StateVector::zero(num_qubits)?.to_density())
    }

    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        Self::from_matrix(CMatrix::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0)))
    }

    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        let num_qubits = dim_to_qubits(m.dim())?;
        if num_qubits == 0 {
            return Err(Error::InvalidConfig("register needs at least one qubit".into()));
        }
        if !m.is_finite() {
            return Err(Error::Unphysical("non-finite entry".into()));
        }
        let asymmetry = m.hermitian_asymmetry();
        if asymmetry > tol::UNITARY {
            return Err(Error::NotHermitian { asymmetry });
        }
        let trace = m.trace().re;
        if (trace - 1.0).abs() > tol::CHANNEL {
            return Err(Error::Unphysical(format!("trace {trace} is not 1")));
        }
        if num_qubits <= 8 {
            let (values, _) = matrix::hermitian_eigen(&m);
            if values[0] < -tol::PSD {
                return Err(Error::Unphysical(format!("negative eigenvalue {}", values[0])));
            }
        }
        Ok(Self { num_qubits, m })
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        let num_qubits = m.dim().trailing_zeros() as usize;
        Self { num_qubits, m }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.m.as_slice().iter().map(|x| x.norm_sqr()).sum()
    }

    /// Real diagonal, clamped at zero against round-off.
    pub fn probabilities(&self) -> Vec<f64> {
        self.m.diagonal().iter().map(|x| x.re.max(0.0)).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        matrix::hermitian_eigen(&self.m).0
    }

    pub fn apply_unitary(&mut self, u: &Unitary, targets: &[usize]) -> Result<()> {
        validate_targets(self.num_qubits, targets)?;
        let expected = 1usize << targets.len();
        if u.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: u.dim(),
            });
        }
        local::apply_left(&mut self.m, self.num_qubits, &u.m, targets);
        local::apply_right_adjoint(&mut self.m, self.num_qubits, &u.m, targets);
        Ok(())
    }

    pub fn apply_channel(&mut self, ch: &KrausChannel, targets: &[usize]) -> Result<()> {
        validate_targets(self.num_qubits, targets)?;
        let expected = 1usize << targets.len();
        if ch.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: ch.dim(),
            });
        }
        local::apply_superoperator(&mut self.m, self.num_qubits, &ch.superop, targets);
        Ok(())
    }

    pub fn apply_superoperator(&mut self, s: &Superoperator, targets: &[usize]) -> Result<()> {
        validate_targets(self.num_qubits, targets)?;
        if s.num_qubits != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: targets.len(),
                actual: s.num_qubits,
            });
        }
        local::apply_superoperator(&mut self.m, self.num_qubits, &s.m, targets);
        Ok(())
    }

    /// Reduced state on `keep`, in the order given (`keep[0]` becomes qubit 0).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::InvalidConfig("partial trace needs at least one kept qubit".into()));
        }
        validate_targets(self.num_qubits, keep)?;
        let kept = local::Subspace::new(self.num_qubits, keep);
        let d = kept.offsets.len();
        let mut out = CMatrix::zeros(d);
        for a in 0..d {
            for b in 0..d {
                let (ra, cb) = (kept.offsets[a], kept.offsets[b]);
                out[(a, b)] = kept
                    .bases
                    .iter()
                    .map(|&t| self.m[(ra + t, cb + t)])
                    .sum();
            }
        }
        Ok(DensityMatrix::from_matrix_unchecked(out))
    }
}

pub fn apply_channel(rho: &DensityMatrix, ch: &KrausChannel, targets: &[usize]) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    out.apply_channel(ch, targets)?;
    Ok(out)
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    rho.partial_trace(keep)
}

/// Single- and two-qubit gate matrices.
pub mod gates {
    use std::f64::consts::FRAC_1_SQRT_2;

    use num_complex::Complex64;

    use super::{CMatrix, Unitary, I, ONE, ZERO};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn h() -> Unitary {
        let s = c(FRAC_1_SQRT_2, 0.0);
        Unitary::new_unchecked(CMatrix::from_rows([[s, s], [s, -s]]))
    }

    pub fn x() -> Unitary {
        Unitary::new_unchecked(CMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]]))
    }

    pub fn y() -> Unitary {
        Unitary::new_unchecked(CMatrix::from_rows([[ZERO, -I], [I, ZERO]]))
    }

    pub fn z() -> Unitary {
        Unitary::new_unchecked(CMatrix::from_rows([[ONE, ZERO], [ZERO, -ONE]]))
    }

    pub fn s() -> Unitary {
        Unitary::new_unchecked(CMatrix::from_rows([[ONE, ZERO], [ZERO, I]]))
    }

    pub fn sdg() -> Unitary {
        s().adjoint()
    }

    /// √X
    pub fn sx() -> Unitary {
        let (p, m) = (c(0.5, 0.5), c(0.5, -0.5));
        Unitary::new_unchecked(CMatrix::from_rows([[p, m], [m, p]]))
    }

    pub fn sxdg() -> Unitary {
        sx().adjoint()
    }

    pub fn rz(theta: f64) -> Unitary {
        let half = theta / 2.0;
        Unitary::new_unchecked(CMatrix::from_rows([
            [Complex64::from_polar(1.0, -half), ZERO],
            [ZERO, Complex64::from_polar(1.0, half)],
        ]))
    }

    pub fn id() -> Unitary {
        Unitary::identity(2)
    }

    /// Control is the first operand (high-order local bit).
    pub fn cnot() -> Unitary {
        Unitary::new_unchecked(CMatrix::from_rows([
            [ONE, ZERO, ZERO, ZERO],
            [ZERO, ONE, ZERO, ZERO],
            [ZERO, ZERO, ZERO, ONE],
            [ZERO, ZERO, ONE, ZERO],
        ]))
    }

    pub fn swap() -> Unitary {
        Unitary::new_unchecked(CMatrix::from_rows([
            [ONE, ZERO, ZERO, ZERO],
            [ZERO, ZERO, ONE, ZERO],
            [ZERO, ONE, ZERO, ZERO],
            [ZERO, ZERO, ZERO, ONE],
        ]))
    }
}
